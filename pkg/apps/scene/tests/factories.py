import factory
import torch

from apps.scene.assets import AssetSpec
from apps.scene.cameras import Camera, CameraRanges
from apps.scene.datasets import DatasetConfig
from apps.scene.grid import Scene


class CameraFactory(factory.Factory):
    class Meta:
        model = Camera

    azimuth = factory.Sequence(lambda n: (37.0 * n) % 360.0)
    elevation = 15.0
    radius = 3.0
    fov = 40.0


class CameraRangesFactory(factory.Factory):
    class Meta:
        model = CameraRanges

    azimuth = (0.0, 360.0)
    elevation = (0.0, 30.0)
    radius = (3.0, 3.0)


class AssetSpecFactory(factory.Factory):
    class Meta:
        model = AssetSpec

    name = factory.Sequence(lambda n: f"class{n}")
    shape = factory.Iterator(['sphere', 'box', 'capsule'])
    color = (0.9, 0.5, 0.1)


class DatasetConfigFactory(factory.Factory):
    """Tiny datasets that render in well under a second"""

    class Meta:
        model = DatasetConfig

    classes = factory.LazyFunction(lambda: (
        AssetSpec('orb', 'sphere', (0.95, 0.55, 0.15)),
        AssetSpec('crate', 'box', (0.15, 0.60, 0.60)),
    ))
    objects_per_class = 1
    views_per_object = 3
    image_size = 16
    grid_size = 16
    samples_per_ray = 32


class SceneFactory(factory.Factory):
    """Random smooth float64 scene for gradient checks"""

    class Meta:
        model = Scene

    grid_size = 8
    dtype = torch.float64

    @factory.post_generation
    def randomize(obj, create, extracted, **kwargs):
        generator = torch.Generator().manual_seed(extracted if extracted is not None else 0)
        with torch.no_grad():
            obj.density_raw.copy_(torch.randn(obj.density_raw.shape, generator=generator, dtype=torch.float64))
            obj.color_raw.copy_(torch.randn(obj.color_raw.shape, generator=generator, dtype=torch.float64))
