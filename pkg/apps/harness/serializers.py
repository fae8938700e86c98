from rest_framework import serializers

from core.exceptions import LabException
from core.management.base import resolve_output
from apps.diffusion.schedule import NoiseSchedule
from apps.scene.serializers import CameraRangesSerializer
from apps.schedules.serializers import ScheduleConfigSerializer
from apps.energy.serializers import EnergySerializer
from apps.distillation.serializers import BaselineSerializer, PriorSerializer
from .experiments import DEFAULT_ENERGY_CHECKPOINTS, DEFAULT_LAMBDAS, DEFAULT_METHODS, parse_method
from .metrics import DetectorSettings
from .runs import COMBINED, JSD, METHODS, RunConfig, SceneSpec


class SceneSpecSerializer(serializers.Serializer):
    grid_size = serializers.IntegerField(min_value=8, default=32)
    extent = serializers.FloatField(min_value=0.1, default=1.0)
    background = serializers.ListField(
        child=serializers.FloatField(min_value=0.0, max_value=1.0), min_length=3, max_length=3,
        default=[0.5, 0.5, 0.5],
    )
    blob_radius = serializers.FloatField(min_value=0.0, default=0.5)
    blob_peak = serializers.FloatField(default=2.0)
    density_floor = serializers.FloatField(default=-4.0)
    dtype = serializers.ChoiceField(choices=['float32', 'float64'], default='float32')

    def create(self, validated_data):
        return SceneSpec(**{**validated_data, 'background': tuple(validated_data['background'])})


class OptimizerSerializer(serializers.Serializer):
    """Adam settings; the density group's rate comes from the schedule"""
    color_lr = serializers.FloatField(min_value=0.0, default=1e-2)
    betas = serializers.ListField(child=serializers.FloatField(min_value=0.0, max_value=1.0),
                                  min_length=2, max_length=2, default=[0.9, 0.99])

    def validate_color_lr(self, value):
        if value <= 0:
            raise serializers.ValidationError('color_lr must be positive')
        return value


def _defaults(serializer_class):
    """Validated data of an omitted section"""
    serializer = serializer_class(data={})
    serializer.is_valid(raise_exception=True)
    return dict(serializer.validated_data)


def _resolved(section, key='checkpoint'):
    if section and section.get(key):
        section[key] = str(resolve_output(section[key]))
    return section


class RunConfigSerializer(serializers.Serializer):
    """Serializer for the `distill` section"""
    label = serializers.CharField()
    method = serializers.ChoiceField(choices=METHODS, default=JSD)
    views = serializers.IntegerField(min_value=1, max_value=8, default=4)
    schedule = ScheduleConfigSerializer()
    energy = EnergySerializer(required=False)
    prior = PriorSerializer(required=False)
    baseline = BaselineSerializer(required=False)
    scene = SceneSpecSerializer(required=False)
    cameras = CameraRangesSerializer(required=False)
    optimizer = OptimizerSerializer(required=False)
    samples_per_ray = serializers.IntegerField(min_value=16, default=32)
    checkpoint_every = serializers.IntegerField(min_value=0, default=0)
    turntable_frames = serializers.IntegerField(min_value=1, default=36)
    turntable_resolution = serializers.IntegerField(min_value=8, default=32)

    def validate(self, attrs):
        if attrs['method'] == COMBINED and not attrs.get('baseline'):
            raise serializers.ValidationError({'baseline': 'The combined method needs a baseline section'})
        return attrs

    def create(self, validated_data):
        data = dict(validated_data)
        energy = _resolved(dict(data.get('energy') or _defaults(EnergySerializer)))
        prior = _resolved(dict(data.get('prior') or _defaults(PriorSerializer)))
        if prior.get('schedule') is not None:
            prior['schedule'] = NoiseSchedule(**prior['schedule'])
        baseline = _resolved(dict(data['baseline'])) if data.get('baseline') else None
        optimizer = data.get('optimizer') or _defaults(OptimizerSerializer)
        try:
            return RunConfig(
                label=data['label'],
                schedule=data['schedule']['config'],
                method=data['method'],
                views=data['views'],
                energy=energy,
                prior=prior,
                baseline=baseline,
                scene=SceneSpecSerializer().create(data.get('scene') or _defaults(SceneSpecSerializer)),
                cameras=CameraRangesSerializer().create(data.get('cameras') or _defaults(CameraRangesSerializer)),
                color_lr=optimizer['color_lr'],
                betas=tuple(optimizer['betas']),
                samples_per_ray=data['samples_per_ray'],
                checkpoint_every=data['checkpoint_every'],
                turntable_frames=data['turntable_frames'],
                turntable_resolution=data['turntable_resolution'],
            )
        except LabException as exc:
            raise serializers.ValidationError(exc.detail)


class DetectorSettingsSerializer(serializers.Serializer):
    """Serializer for the `janus` section"""
    frames = serializers.IntegerField(min_value=2, required=False)
    elevation = serializers.FloatField(min_value=-89.0, max_value=89.0, required=False)
    resolution = serializers.IntegerField(min_value=8, required=False)
    min_marker_pixels = serializers.IntegerField(min_value=1, required=False)
    relative_threshold = serializers.FloatField(min_value=0.0, max_value=0.99, required=False)
    runs = serializers.ListField(child=serializers.CharField(), default=list)

    def create(self, validated_data):
        data = dict(validated_data)
        runs = data.pop('runs')
        return {'detector': DetectorSettings.from_settings(**data), 'runs': runs}


class SweepSerializer(serializers.Serializer):
    """Serializer for the `sweep` section"""
    methods = serializers.ListField(child=serializers.CharField(), default=list(DEFAULT_METHODS))
    labels = serializers.ListField(child=serializers.CharField(), min_length=1,
                                   default=['orb', 'crate', 'pill', 'pebble'])
    seeds = serializers.IntegerField(min_value=1, default=8)
    window = serializers.IntegerField(min_value=2, default=100)
    dataset = serializers.CharField(required=False, allow_null=True, default=None)
    output = serializers.CharField(default='runs/sweep')
    energies = serializers.DictField(child=serializers.CharField(), default=dict(DEFAULT_ENERGY_CHECKPOINTS))
    baseline_checkpoint = serializers.CharField(default='checkpoints/mvs.pt')
    lambdas = serializers.ListField(child=serializers.FloatField(min_value=0.0), default=list(DEFAULT_LAMBDAS))

    def validate_methods(self, value):
        for key in value:
            try:
                parse_method(key)
            except LabException as exc:
                raise serializers.ValidationError(exc.detail)
        return value

    def create(self, validated_data):
        data = dict(validated_data)
        data['methods'] = [parse_method(key) for key in data['methods']]
        data['energies'] = {name: str(resolve_output(path)) for name, path in data['energies'].items()}
        data['baseline_checkpoint'] = str(resolve_output(data['baseline_checkpoint']))
        if data.get('dataset'):
            data['dataset'] = resolve_output(data['dataset'])
        return data
