from rest_framework import serializers

from core.exceptions import ConfigError
from .policies import (
    ScheduleConfig,
    default_stages,
    DEFAULT_WARMUP_FRACTION,
    DEFAULT_ANNEAL_FRACTION,
    DEFAULT_SWITCH_FRACTION,
)


class ResolutionStageSerializer(serializers.Serializer):
    start_iter = serializers.IntegerField(min_value=0)
    resolution = serializers.ListField(child=serializers.IntegerField(min_value=8), min_length=2, max_length=2)


class ScheduleConfigSerializer(serializers.Serializer):
    """
    Serializer for the `distill.schedule` section.

    Iteration boundaries may be given absolutely or as fractions of
    total_iters; absolute values win.
    """
    total_iters = serializers.IntegerField(min_value=1)
    warmup_iters = serializers.IntegerField(min_value=0, required=False)
    anneal_iter = serializers.IntegerField(min_value=0, required=False)
    switch_iter = serializers.IntegerField(min_value=0, required=False)
    warmup_fraction = serializers.FloatField(min_value=0.0, max_value=1.0, default=DEFAULT_WARMUP_FRACTION)
    anneal_fraction = serializers.FloatField(min_value=0.0, max_value=1.0, default=DEFAULT_ANNEAL_FRACTION)
    switch_fraction = serializers.FloatField(min_value=0.0, max_value=1.0, default=DEFAULT_SWITCH_FRACTION)
    cfg_before = serializers.FloatField(min_value=0.0, default=30.0)
    cfg_after = serializers.FloatField(min_value=0.0, default=50.0)
    density_lr_before = serializers.FloatField(default=1e-2)
    density_lr_after = serializers.FloatField(default=1e-6)
    orientation_weight_before = serializers.FloatField(min_value=0.0, default=0.1)
    orientation_weight_after = serializers.FloatField(min_value=0.0, default=0.0)
    t_fixed = serializers.FloatField(min_value=0.0, max_value=1.0, default=0.98)
    t_range_after = serializers.ListField(
        child=serializers.FloatField(min_value=0.0, max_value=1.0),
        min_length=2, max_length=2, default=[0.02, 0.50],
    )
    resolution_stages = ResolutionStageSerializer(many=True, required=False)

    def validate(self, attrs):
        try:
            attrs['config'] = self._build(attrs)
        except ConfigError as exc:
            raise serializers.ValidationError(exc.detail)
        return attrs

    def _build(self, attrs):
        total = attrs['total_iters']
        overrides = {
            key: attrs[key] for key in (
                'cfg_before', 'cfg_after', 'density_lr_before', 'density_lr_after',
                'orientation_weight_before', 'orientation_weight_after', 't_fixed',
            )
        }
        overrides['t_range_after'] = tuple(attrs['t_range_after'])
        if attrs.get('resolution_stages'):
            overrides['resolution_stages'] = tuple(
                (stage['start_iter'], tuple(stage['resolution'])) for stage in attrs['resolution_stages']
            )
        config = ScheduleConfig.from_fractions(
            total,
            warmup_fraction=attrs['warmup_fraction'],
            anneal_fraction=attrs['anneal_fraction'],
            switch_fraction=attrs['switch_fraction'],
            **overrides,
        )
        absolute = {key: attrs[key] for key in ('warmup_iters', 'anneal_iter', 'switch_iter') if key in attrs}
        if absolute:
            fields = {**config.__dict__, **absolute}
            if 'resolution_stages' not in overrides:
                fields['resolution_stages'] = default_stages(fields['anneal_iter'], fields['switch_iter'])
            config = ScheduleConfig(**fields)
        return config

    def create(self, validated_data):
        return validated_data['config']
