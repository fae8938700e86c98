"""
Differentiable emission-absorption rendering of voxel scenes.

Rays are marched with a fixed stride between their entry and exit points of
the grid cube. Training renders jitter each sample inside its stratum;
evaluation renders use stratum midpoints and are fully deterministic.
"""
import math
from dataclasses import dataclass, field
from typing import List, Optional

import torch
import torch.nn.functional as F

from .cameras import Camera
from .exceptions import EyeInsideGridException, InvalidRenderOptionsException
from .grid import sample_grid

MIN_RESOLUTION = 8
MIN_SAMPLES = 16


@dataclass(frozen=True)
class RenderOptions:
    resolution: tuple = (32, 32)
    samples_per_ray: int = 64
    training: bool = False

    def __post_init__(self):
        height, width = self.resolution
        object.__setattr__(self, 'resolution', (int(height), int(width)))
        if height < MIN_RESOLUTION or width < MIN_RESOLUTION:
            raise InvalidRenderOptionsException(f"Resolution must be at least {MIN_RESOLUTION}x{MIN_RESOLUTION}")
        if self.samples_per_ray < MIN_SAMPLES:
            raise InvalidRenderOptionsException(f"At least {MIN_SAMPLES} samples per ray are required")

    def at(self, resolution=None, training=None):
        return RenderOptions(
            resolution=resolution or self.resolution,
            samples_per_ray=self.samples_per_ray,
            training=self.training if training is None else training,
        )


@dataclass
class RenderResult:
    rgb: torch.Tensor            # [3, H, W]
    opacity: torch.Tensor        # [H, W]
    transmittance: torch.Tensor  # [H, W], light reaching the background


@dataclass
class RenderBatch:
    images: torch.Tensor         # [V, 3, H, W]
    cameras: List[Camera] = field(default_factory=list)


def camera_rays(camera, height, width, dtype=torch.float32):
    """
    Pinhole rays through pixel centres, row 0 at the top.

    Returns:
        origins: [H*W, 3]
        directions: unit vectors [H*W, 3]
    """
    rotation = torch.as_tensor(camera.rotation(), dtype=dtype)
    eye = torch.as_tensor(camera.eye, dtype=dtype)
    half = math.tan(math.radians(camera.fov) / 2.0)
    aspect = width / height

    rows = (torch.arange(height, dtype=dtype) + 0.5) / height
    cols = (torch.arange(width, dtype=dtype) + 0.5) / width
    i, j = torch.meshgrid(rows, cols, indexing='ij')
    x = (2.0 * j - 1.0) * half * aspect
    y = (1.0 - 2.0 * i) * half
    directions = torch.stack([x, y, -torch.ones_like(x)], dim=-1).reshape(-1, 3)
    directions = directions / directions.norm(dim=-1, keepdim=True)
    # Rows of `rotation` are the camera axes in world space
    directions = directions @ rotation
    origins = eye.expand_as(directions)
    return origins, directions


def intersect_box(origins, directions, extent):
    """Slab test against [-extent, extent]^3; misses get an empty interval"""
    safe = torch.where(directions.abs() < 1e-12, torch.full_like(directions, 1e-12), directions)
    inverse = 1.0 / safe
    t0 = (-extent - origins) * inverse
    t1 = (extent - origins) * inverse
    near = torch.minimum(t0, t1).amax(dim=-1).clamp(min=0.0)
    far = torch.maximum(t0, t1).amin(dim=-1)
    hit = far > near
    far = torch.where(hit, far, near)
    return near, far


def _check_eye(scene, camera):
    if scene.contains(camera.eye):
        raise EyeInsideGridException(
            f"Camera at radius {camera.radius} places the eye inside the grid of half-width {scene.extent}"
        )


def march(scene, camera, options, stream=None):
    """
    Sample the scene along every pixel ray and compute compositing weights.

    Jitter is drawn from `stream` (one uniform per sample) when
    options.training is set; otherwise midpoints are used.
    """
    _check_eye(scene, camera)
    height, width = options.resolution
    dtype = scene.density_raw.dtype
    samples = options.samples_per_ray

    origins, directions = camera_rays(camera, height, width, dtype)
    near, far = intersect_box(origins, directions, scene.extent)
    rays = origins.shape[0]

    if options.training and stream is not None:
        offsets = stream.uniform((rays, samples), dtype=dtype)
    else:
        offsets = torch.full((rays, samples), 0.5, dtype=dtype)
    strata = torch.arange(samples, dtype=dtype).unsqueeze(0)
    delta = ((far - near) / samples).unsqueeze(-1)
    depths = near.unsqueeze(-1) + (strata + offsets) * delta
    points = origins.unsqueeze(1) + depths.unsqueeze(-1) * directions.unsqueeze(1)

    sigma, rgb = scene.sample(points.reshape(-1, 3))
    sigma = sigma.reshape(rays, samples)
    rgb = rgb.reshape(rays, samples, 3)

    optical = sigma * delta
    alpha = 1.0 - torch.exp(-optical)
    accumulated = torch.cumsum(optical, dim=-1)
    exclusive = torch.cat([torch.zeros_like(accumulated[:, :1]), accumulated[:, :-1]], dim=-1)
    weights = torch.exp(-exclusive) * alpha

    return {
        'points': points,
        'directions': directions,
        'sigma': sigma,
        'rgb': rgb,
        'weights': weights,
        'transmittance': torch.exp(-accumulated[:, -1]),
    }


def render(scene, camera, options=None, stream=None):
    """
    Render one view.

    Args:
        scene: Voxel scene
        camera: Viewing camera (eye must lie outside the grid)
        options: Resolution, samples per ray and training/eval mode
        stream: ViewStream supplying jitter in training mode

    Returns:
        RenderResult with rgb [3, H, W] in [0, 1]
    """
    options = options or RenderOptions()
    height, width = options.resolution
    marched = march(scene, camera, options, stream)
    weights = marched['weights']
    transmittance = marched['transmittance']

    color = (weights.unsqueeze(-1) * marched['rgb']).sum(dim=1)
    color = color + transmittance.unsqueeze(-1) * scene.background.to(color.dtype)
    return RenderResult(
        rgb=color.reshape(height, width, 3).permute(2, 0, 1),
        opacity=weights.sum(dim=-1).reshape(height, width),
        transmittance=transmittance.reshape(height, width),
    )


def render_batch(scene, cameras, options=None, streams: Optional[list] = None):
    streams = streams or [None] * len(cameras)
    images = [render(scene, camera, options, stream).rgb for camera, stream in zip(cameras, streams)]
    return RenderBatch(images=torch.stack(images), cameras=list(cameras))


def density_gradient(scene):
    """(3, D, H, W) central-difference gradient (x, y, z) of the activated density"""
    sigma = scene.density()
    padded = F.pad(sigma[None, None], (1, 1, 1, 1, 1, 1), mode='replicate')[0, 0]
    spacing = 2.0 * scene.voxel_size
    grad_x = (padded[1:-1, 1:-1, 2:] - padded[1:-1, 1:-1, :-2]) / spacing
    grad_y = (padded[1:-1, 2:, 1:-1] - padded[1:-1, :-2, 1:-1]) / spacing
    grad_z = (padded[2:, 1:-1, 1:-1] - padded[:-2, 1:-1, 1:-1]) / spacing
    return torch.stack([grad_x, grad_y, grad_z])


def orientation_loss(scene, camera, options=None, stream=None, eps=1e-8):
    """
    Opacity-weighted mean of max(0, n·d)² over ray samples, with n the
    outward normal -∇σ/|∇σ| and d the ray direction. Penalises visible
    surfaces facing away from the camera.
    """
    options = options or RenderOptions()
    marched = march(scene, camera, options, stream)
    weights = marched['weights']
    points = marched['points'].reshape(-1, 3)

    gradient = sample_grid(density_gradient(scene), points / scene.extent)
    normals = -gradient / torch.sqrt((gradient ** 2).sum(dim=-1, keepdim=True) + eps)
    directions = marched['directions'].unsqueeze(1).expand(-1, weights.shape[1], -1).reshape(-1, 3)
    facing = torch.relu((normals * directions).sum(dim=-1)).reshape(weights.shape)

    return (weights * facing ** 2).sum() / (weights.sum() + eps)
