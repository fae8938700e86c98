"""
Procedural "creature" assets.

Each asset is a body primitive with a saturated magenta marker covering a
20° cone around each marker azimuth (a single +X marker by default) and a
baked key light from +X, so the front is brighter than the back.
"""
import math
from dataclasses import dataclass

import torch

from .exceptions import InvalidAssetSpecException
from .grid import Scene, inverse_softplus, logit

SHAPES = ('sphere', 'box', 'capsule')
MARKER_COLOR = (1.0, 0.0, 1.0)
MARKER_ANGLE = 20.0
LIGHT_STRENGTH = 0.35
SURFACE_DENSITY = 40.0
SURFACE_SOFTNESS = 0.02


@dataclass(frozen=True)
class AssetSpec:
    name: str
    shape: str
    color: tuple
    marker_azimuths: tuple = (0.0,)
    size: float = 1.0

    def __post_init__(self):
        if not self.name:
            raise InvalidAssetSpecException('Asset classes need a name')
        if self.shape not in SHAPES:
            raise InvalidAssetSpecException(f"Unknown shape '{self.shape}', expected one of {SHAPES}")
        if len(self.color) != 3 or any(not 0.0 <= c <= 1.0 for c in self.color):
            raise InvalidAssetSpecException(f"Colour of '{self.name}' must be three values in [0, 1]")
        if self.size <= 0 or self.size > 1.5:
            raise InvalidAssetSpecException('Asset size must lie in (0, 1.5]')
        object.__setattr__(self, 'color', tuple(float(c) for c in self.color))
        object.__setattr__(self, 'marker_azimuths', tuple(float(a) for a in self.marker_azimuths))

    def mirrored(self):
        """Copy carrying a second marker on the back, the synthetic Janus case"""
        azimuths = self.marker_azimuths + tuple((a + 180.0) % 360.0 for a in self.marker_azimuths)
        return AssetSpec(self.name, self.shape, self.color, azimuths, self.size)


DEFAULT_CLASSES = (
    AssetSpec('orb', 'sphere', (0.95, 0.55, 0.15)),
    AssetSpec('crate', 'box', (0.15, 0.60, 0.60)),
    AssetSpec('pill', 'capsule', (0.95, 0.85, 0.20)),
    AssetSpec('pebble', 'sphere', (0.35, 0.70, 0.45), size=0.85),
)


def signed_distance(shape, points, size):
    """Signed distance of world points [..., 3] to the body primitive"""
    if shape == 'sphere':
        return points.norm(dim=-1) - 0.5 * size
    if shape == 'box':
        q = points.abs() - 0.38 * size
        outside = torch.clamp(q, min=0.0).norm(dim=-1)
        inside = torch.clamp(q.amax(dim=-1), max=0.0)
        return outside + inside
    # capsule: vertical segment
    half = 0.25 * size
    axis = torch.zeros_like(points)
    axis[..., 2] = points[..., 2].clamp(-half, half)
    return (points - axis).norm(dim=-1) - 0.28 * size


def marker_mask(points, azimuths, angle=MARKER_ANGLE):
    directions = points / points.norm(dim=-1, keepdim=True).clamp(min=1e-9)
    mask = torch.zeros(points.shape[:-1], dtype=torch.bool)
    threshold = math.cos(math.radians(angle))
    for azimuth in azimuths:
        centre = torch.tensor(
            [math.cos(math.radians(azimuth)), math.sin(math.radians(azimuth)), 0.0], dtype=points.dtype,
        )
        mask |= (directions * centre).sum(dim=-1) >= threshold
    return mask


def build_asset(spec, grid_size=32, extent=1.0, scale=1.0, color=None,
                light_strength=LIGHT_STRENGTH, dtype=torch.float32):
    """
    Bake an asset into a voxel scene.

    Args:
        spec: Class specification
        grid_size: Voxels per axis
        scale: Per-instance size multiplier
        color: Per-instance body colour override

    Returns:
        Scene whose parameters encode the asset
    """
    scene = Scene(grid_size=grid_size, extent=extent, dtype=dtype)
    points = scene.voxel_centers()
    body = torch.tensor(color or spec.color, dtype=dtype)

    sdf = signed_distance(spec.shape, points, spec.size * scale)
    sigma = SURFACE_DENSITY * torch.sigmoid(-sdf / SURFACE_SOFTNESS)

    directions = points / points.norm(dim=-1, keepdim=True).clamp(min=1e-9)
    shade = 1.0 - light_strength * (1.0 - directions[..., 0]) / 2.0
    rgb = body * shade.unsqueeze(-1)
    rgb[marker_mask(points, spec.marker_azimuths)] = torch.tensor(MARKER_COLOR, dtype=dtype)

    with torch.no_grad():
        scene.density_raw.copy_(inverse_softplus(sigma))
        scene.color_raw.copy_(logit(rgb))
    return scene
