import logging

import torch

from core.checkpoints import CheckpointService
from .grid import Scene

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = 'scene'


class SceneService:
    """Service for persisting voxel scenes"""

    @staticmethod
    def save(scene, path, metadata=None):
        grid = {
            'grid_size': scene.grid_size,
            'extent': scene.extent,
            'background': [float(c) for c in scene.background.tolist()],
            'dtype': str(scene.density_raw.dtype).replace('torch.', ''),
        }
        state = {'density_raw': scene.density_raw, 'color_raw': scene.color_raw}
        return CheckpointService.save(path, CHECKPOINT_KIND, state, {'grid': grid, **(metadata or {})})

    @staticmethod
    def load(path):
        """Returns (scene, metadata)"""
        state, metadata = CheckpointService.load(path, CHECKPOINT_KIND)
        grid = metadata['grid']
        scene = Scene(grid_size=grid['grid_size'], extent=grid['extent'], background=tuple(grid['background']),
                      dtype=getattr(torch, grid.get('dtype', 'float32')))
        with torch.no_grad():
            scene.density_raw.copy_(state['density_raw'])
            scene.color_raw.copy_(state['color_raw'])
        return scene, metadata
