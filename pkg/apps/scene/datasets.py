"""
Procedural multi-view dataset generation and persistence.

Views are planned first (object instances, cameras, buckets) and rendered
afterwards, so view statistics can be checked without rendering.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

import torch

from core.rng import numpy_rng, seeded_generator
from core.utils.csvlog import read_rows, write_rows
from core.utils.images import load_png, save_png
from core.exceptions import ContractError
from .assets import AssetSpec, DEFAULT_CLASSES, build_asset
from .cameras import Camera, FRONT, SIDE, BACK, OVERHEAD, VIEW_BUCKETS, view_bucket
from .rendering import RenderOptions, render

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ('file_name', 'label', 'object_id', 'azimuth', 'elevation', 'radius', 'fov', 'bucket')

FRONT_BIASED = {FRONT: 0.7, SIDE: 0.2, BACK: 0.1, OVERHEAD: 0.0}
BALANCED = {FRONT: 0.25, SIDE: 0.5, BACK: 0.25, OVERHEAD: 0.0}

_BUCKET_ARCS = {
    FRONT: ((-45.0, 45.0),),
    SIDE: ((45.0, 135.0), (225.0, 315.0)),
    BACK: ((135.0, 225.0),),
}


@dataclass(frozen=True)
class DatasetConfig:
    classes: tuple = DEFAULT_CLASSES
    objects_per_class: int = 4
    views_per_object: int = 24
    image_size: int = 32
    grid_size: int = 32
    samples_per_ray: int = 64
    bucket_weights: dict = field(default_factory=lambda: dict(FRONT_BIASED))
    elevation: tuple = (0.0, 30.0)
    radius: float = 3.0
    fov: float = 40.0
    scale_jitter: tuple = (0.9, 1.1)
    color_jitter: float = 0.05

    def __post_init__(self):
        if len(self.classes) < 2:
            raise ContractError('A dataset needs at least two shape classes')
        names = [spec.name for spec in self.classes]
        if len(set(names)) != len(names):
            raise ContractError('Shape class names must be unique')
        if self.objects_per_class < 1 or self.views_per_object < 1:
            raise ContractError('objects_per_class and views_per_object must be positive')
        weights = self.bucket_weights
        if set(weights) - set(VIEW_BUCKETS) or any(w < 0 for w in weights.values()):
            raise ContractError(f"bucket_weights must map {VIEW_BUCKETS} to non-negative weights")
        if weights.get(OVERHEAD, 0.0) > 0:
            raise ContractError('Overhead views are unreachable within the camera elevation range')
        if sum(weights.values()) <= 0:
            raise ContractError('bucket_weights must not all be zero')


@dataclass(frozen=True)
class ViewRecord:
    file_name: str
    label: str
    object_id: str
    camera: Camera
    bucket: str


@dataclass(frozen=True)
class ObjectInstance:
    object_id: str
    spec: AssetSpec
    scale: float
    color: tuple


@dataclass
class ViewPlan:
    instance: ObjectInstance
    cameras: List[Camera]


def sample_bucketed_azimuth(weights, generator):
    """Pick a bucket by weight, then an azimuth uniformly inside it"""
    buckets = [b for b in (FRONT, SIDE, BACK) if weights.get(b, 0.0) > 0]
    probabilities = torch.tensor([weights[b] for b in buckets], dtype=torch.float64)
    choice = torch.multinomial(probabilities / probabilities.sum(), 1, generator=generator).item()
    arcs = _BUCKET_ARCS[buckets[choice]]
    draws = torch.rand(2, generator=generator, dtype=torch.float64)
    low, high = arcs[int(draws[0].item() * len(arcs))]
    return (low + (high - low) * draws[1].item()) % 360.0


def plan_views(config, seed):
    """Object instances and their cameras, deterministic per seed"""
    plans = []
    index = 0
    for spec in config.classes:
        for k in range(config.objects_per_class):
            rng = numpy_rng(seed, index, 0)
            scale = float(rng.uniform(*config.scale_jitter))
            color = tuple(float(min(1.0, max(0.0, c + rng.uniform(-config.color_jitter, config.color_jitter))))
                          for c in spec.color)
            instance = ObjectInstance(f"{spec.name}-{k:03d}", spec, scale, color)

            generator = seeded_generator(seed, index, 1)
            cameras = []
            for _ in range(config.views_per_object):
                azimuth = sample_bucketed_azimuth(config.bucket_weights, generator)
                low, high = config.elevation
                elevation = low + (high - low) * torch.rand(1, generator=generator, dtype=torch.float64).item()
                cameras.append(Camera(azimuth, elevation, config.radius, config.fov))
            plans.append(ViewPlan(instance, cameras))
            index += 1
    return plans


class MultiViewDataset:
    """Rendered views (in [0, 1]) with their labels, objects, cameras and buckets"""

    def __init__(self, images, records):
        if images.shape[0] != len(records):
            raise ContractError('Every image needs exactly one record')
        self.images = images
        self.records = list(records)

    def __len__(self):
        return len(self.records)

    @property
    def labels(self):
        return sorted({record.label for record in self.records})

    @property
    def image_size(self):
        return self.images.shape[-1]

    def model_images(self):
        """Images mapped to the model space [-1, 1]"""
        return self.images * 2.0 - 1.0

    def indices_by_object(self):
        groups = {}
        for index, record in enumerate(self.records):
            groups.setdefault(record.object_id, []).append(index)
        return groups

    def objects_by_label(self):
        groups = {}
        for record in self.records:
            objects = groups.setdefault(record.label, [])
            if record.object_id not in objects:
                objects.append(record.object_id)
        return groups

    def subset(self, indices):
        indices = list(indices)
        return MultiViewDataset(self.images[indices], [self.records[i] for i in indices])

    def bucket_fraction(self, bucket):
        if not self.records:
            return 0.0
        return sum(record.bucket == bucket for record in self.records) / len(self.records)

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        rows = []
        for image, record in zip(self.images, self.records):
            save_png(image, directory / record.file_name)
            rows.append({
                'file_name': record.file_name,
                'label': record.label,
                'object_id': record.object_id,
                'azimuth': record.camera.azimuth,
                'elevation': record.camera.elevation,
                'radius': record.camera.radius,
                'fov': record.camera.fov,
                'bucket': record.bucket,
            })
        write_rows(directory / 'manifest.csv', MANIFEST_COLUMNS, rows)
        logger.info(f"Saved {len(self)} views to {directory}")
        return directory

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        manifest = directory / 'manifest.csv'
        if not manifest.is_file():
            raise ContractError(f"No dataset manifest in {directory}")
        records, images = [], []
        for row in read_rows(manifest):
            camera = Camera(float(row['azimuth']), float(row['elevation']), float(row['radius']), float(row['fov']))
            records.append(ViewRecord(row['file_name'], row['label'], row['object_id'], camera, row['bucket']))
            images.append(load_png(directory / row['file_name']))
        if not records:
            raise ContractError(f"Dataset in {directory} is empty")
        return cls(torch.stack(images), records)


def generate_dataset(config, seed):
    """
    Render every planned view of every object instance.

    Returns:
        MultiViewDataset, byte-identical for a fixed (config, seed)
    """
    options = RenderOptions(resolution=(config.image_size, config.image_size),
                            samples_per_ray=config.samples_per_ray)
    images, records = [], []
    for plan in plan_views(config, seed):
        instance = plan.instance
        scene = build_asset(instance.spec, grid_size=config.grid_size, scale=instance.scale, color=instance.color)
        with torch.no_grad():
            for view, camera in enumerate(plan.cameras):
                images.append(render(scene, camera, options).rgb)
                records.append(ViewRecord(
                    file_name=f"{instance.object_id}_{view:03d}.png",
                    label=instance.spec.name,
                    object_id=instance.object_id,
                    camera=camera,
                    bucket=view_bucket(camera.azimuth, camera.elevation),
                ))
    logger.info(f"Generated {len(records)} views of {len(config.classes)} classes")
    return MultiViewDataset(torch.stack(images), records)
