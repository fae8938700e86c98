"""
Dense voxel scene: the learnable 3D representation.

Grids are indexed [z, y, x] (depth, height, width) so that F.grid_sample can
read them with world coordinates (x, y, z) normalised to [-1, 1]. Voxel
centres sit on linspace(-extent, extent, G) along every axis.
"""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .exceptions import SceneException

BACKGROUND = (0.5, 0.5, 0.5)


class Scene(nn.Module):
    """
    Voxel grid of raw densities (softplus -> σ ≥ 0) and raw colours
    (sigmoid -> [0, 1]^3). Raw values of -inf give exactly empty space.
    """

    def __init__(self, grid_size: int = 32, extent: float = 1.0, background=BACKGROUND,
                 density_init: float = -4.0, dtype=torch.float32):
        super().__init__()
        if grid_size < 8:
            raise SceneException('Grid resolution must be at least 8')
        if extent <= 0:
            raise SceneException('Grid extent must be positive')
        self.grid_size = grid_size
        self.extent = float(extent)
        self.register_buffer('background', torch.tensor(background, dtype=dtype))
        self.density_raw = nn.Parameter(torch.full((grid_size,) * 3, float(density_init), dtype=dtype))
        self.color_raw = nn.Parameter(torch.zeros((grid_size,) * 3 + (3,), dtype=dtype))

    @classmethod
    def with_blob(cls, grid_size=32, extent=1.0, radius=0.5, peak=2.0, floor=-4.0, **kwargs):
        """Scene initialised with a soft density blob at the centre"""
        scene = cls(grid_size=grid_size, extent=extent, density_init=floor, **kwargs)
        with torch.no_grad():
            distance = scene.voxel_centers().norm(dim=-1)
            scene.density_raw.copy_(floor + (peak - floor) * torch.clamp(1.0 - distance / radius, min=0.0))
        return scene

    def voxel_centers(self):
        """(G, G, G, 3) world coordinates (x, y, z) of voxel centres"""
        axis = torch.linspace(-self.extent, self.extent, self.grid_size, dtype=self.density_raw.dtype)
        z, y, x = torch.meshgrid(axis, axis, axis, indexing='ij')
        return torch.stack([x, y, z], dim=-1)

    @property
    def voxel_size(self):
        return 2.0 * self.extent / (self.grid_size - 1)

    def density(self):
        return F.softplus(self.density_raw)

    def color(self):
        return torch.sigmoid(self.color_raw)

    def contains(self, point):
        return all(abs(float(c)) <= self.extent for c in point)

    def sample(self, points):
        """
        Trilinearly interpolate activated density and colour.

        Args:
            points: World coordinates [N, 3]

        Returns:
            sigma: Densities [N]
            rgb: Colours [N, 3]
        """
        volume = torch.cat([self.density().unsqueeze(0), self.color().permute(3, 0, 1, 2)], dim=0)
        values = sample_grid(volume, points / self.extent)
        return values[:, 0], values[:, 1:]

    def extra_repr(self):
        return f"grid_size={self.grid_size}, extent={self.extent}"


def sample_grid(volume, normalized_points):
    """
    Read a (C, D, H, W) volume at points already normalised to [-1, 1].

    Points outside the cube read zeros.
    """
    grid = normalized_points.reshape(1, 1, 1, -1, 3).to(volume.dtype)
    values = F.grid_sample(volume.unsqueeze(0), grid, mode='bilinear', padding_mode='zeros', align_corners=True)
    return values.reshape(volume.shape[0], -1).transpose(0, 1)


def inverse_softplus(value):
    """Raw density producing `value` after softplus"""
    value = torch.as_tensor(value)
    return torch.where(value > 20.0, value, torch.log(torch.expm1(value.clamp(min=1e-12))))


def logit(value, eps=1e-4):
    value = torch.as_tensor(value).clamp(eps, 1.0 - eps)
    return torch.log(value) - torch.log1p(-value)
