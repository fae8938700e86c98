from rest_framework import serializers

from core.exceptions import ContractError
from .schedule import NoiseSchedule
from .services import DiffusionTrainingConfig


class NoiseScheduleSerializer(serializers.Serializer):
    num_steps = serializers.IntegerField(min_value=1, default=1000)
    offset = serializers.FloatField(min_value=0.0, default=0.008)
    alpha_floor = serializers.FloatField(min_value=0.0, max_value=0.5, default=1e-4)

    def create(self, validated_data):
        return NoiseSchedule(**validated_data)


class DiffusionTrainingSerializer(serializers.Serializer):
    """Serializer for the `diffusion` section"""
    dataset = serializers.CharField(default='data/front_biased')
    checkpoint = serializers.CharField(default='checkpoints/denoiser.pt')
    epochs = serializers.IntegerField(min_value=1, default=40)
    batch_size = serializers.IntegerField(min_value=1, default=32)
    lr = serializers.FloatField(min_value=0.0, default=1e-3)
    base_channels = serializers.IntegerField(min_value=8, default=32)
    condition_dropout = serializers.FloatField(min_value=0.0, max_value=0.99, default=0.1)
    held_out_fraction = serializers.FloatField(min_value=0.0, max_value=0.9, default=0.1)
    eval_every = serializers.IntegerField(min_value=1, default=50)
    schedule = NoiseScheduleSerializer(required=False)

    def validate_base_channels(self, value):
        if value % 8:
            raise serializers.ValidationError('base_channels must be a multiple of 8')
        return value

    def create(self, validated_data):
        training = {
            key: validated_data[key] for key in (
                'epochs', 'batch_size', 'lr', 'base_channels', 'condition_dropout',
                'held_out_fraction', 'eval_every',
            )
        }
        try:
            config = DiffusionTrainingConfig(**training)
        except ContractError as exc:
            raise serializers.ValidationError(exc.detail)
        schedule = NoiseSchedule(**validated_data.get('schedule', {}))
        return {
            'config': config,
            'schedule': schedule,
            'dataset': validated_data['dataset'],
            'checkpoint': validated_data['checkpoint'],
        }
