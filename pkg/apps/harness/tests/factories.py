import factory

from apps.scene.cameras import CameraRanges
from apps.schedules.policies import ScheduleConfig
from apps.harness.metrics import DetectorSettings
from apps.harness.runs import RunConfig, SceneSpec


def tiny_schedule(total_iters=10, warmup_fraction=0.2):
    return ScheduleConfig.from_fractions(total_iters, warmup_fraction=warmup_fraction, resolutions=((8, 8),))


class RunConfigFactory(factory.Factory):
    """Ten oracle-prior steps on a 16^3 grid at 8x8"""

    class Meta:
        model = RunConfig

    label = 'orb'
    schedule = factory.LazyFunction(tiny_schedule)
    method = 'jsd'
    views = 2
    energy = factory.LazyFunction(lambda: {'name': 'quadratic', 'weight': 1.0, 'kappa': 0.5,
                                           'checkpoint': None, 'reference': 'random'})
    prior = factory.LazyFunction(lambda: {'name': 'oracle', 'checkpoint': None})
    scene = SceneSpec(grid_size=16)
    cameras = CameraRanges()
    samples_per_ray = 16
    turntable_frames = 4
    turntable_resolution = 8


class DetectorSettingsFactory(factory.Factory):
    class Meta:
        model = DetectorSettings

    frames = 36
    elevation = 15.0
    resolution = 64
    min_marker_pixels = 6
    relative_threshold = 0.3
    samples_per_ray = 64
