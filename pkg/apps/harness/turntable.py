"""
Evaluation turntables: equally spaced azimuths at one elevation, rendered
with stratum midpoints so re-exports are byte-identical.
"""
import logging
from pathlib import Path

import torch

from core.exceptions import ContractError
from core.utils.images import save_png
from apps.scene.cameras import Camera
from apps.scene.rendering import RenderOptions, render

logger = logging.getLogger(__name__)


def turntable_cameras(frames, elevation=15.0, radius=3.0, fov=40.0):
    if frames < 1:
        raise ContractError('A turntable needs at least one frame')
    stride = 360.0 / frames
    return [Camera(i * stride, elevation, radius, fov) for i in range(frames)]


def render_turntable(scene, frames, resolution=32, elevation=15.0, radius=3.0, samples_per_ray=64):
    """(frames, 3, H, W) images in [0, 1]"""
    options = RenderOptions(resolution=(resolution, resolution), samples_per_ray=samples_per_ray, training=False)
    with torch.no_grad():
        return torch.stack([render(scene, camera, options).rgb
                            for camera in turntable_cameras(frames, elevation, radius)])


def export_turntable(scene, frames, resolution, directory, elevation=15.0, radius=3.0, samples_per_ray=64):
    """
    Write frame_0000.png onward into `directory`.

    Returns:
        List of written paths in azimuth order
    """
    directory = Path(directory)
    images = render_turntable(scene, frames, resolution, elevation, radius, samples_per_ray)
    paths = [save_png(image, directory / f"frame_{i:04d}.png") for i, image in enumerate(images)]
    logger.info(f"Exported {len(paths)} turntable frames to {directory}")
    return paths
