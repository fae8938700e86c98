from rest_framework import serializers

from apps.diffusion.serializers import NoiseScheduleSerializer
from .priors import PRIORS
from .weighting import ENERGY_INPUTS, SIGMA_SQ, NOISED, WEIGHTINGS


class PriorSerializer(serializers.Serializer):
    """Serializer for `distill.prior`"""
    name = serializers.ChoiceField(choices=sorted(PRIORS), default='denoiser')
    checkpoint = serializers.CharField(default='checkpoints/denoiser.pt')
    allow_untrained = serializers.BooleanField(default=False)
    view_conditioning = serializers.BooleanField(default=True)
    value = serializers.FloatField(default=0.0)
    weighting = serializers.ChoiceField(choices=WEIGHTINGS, default=SIGMA_SQ)
    energy_input = serializers.ChoiceField(choices=ENERGY_INPUTS, default=NOISED)
    schedule = NoiseScheduleSerializer(required=False)

    def validate(self, attrs):
        if attrs['name'] != 'denoiser':
            attrs['checkpoint'] = None
        return attrs

    def create(self, validated_data):
        return dict(validated_data)


class BaselineSerializer(serializers.Serializer):
    """Serializer for `distill.baseline`, the weighted SDS + multi-view combination"""
    lambda_sds = serializers.FloatField(min_value=0.0, default=1.0)
    lambda_view = serializers.FloatField(min_value=0.0, default=1.0)
    checkpoint = serializers.CharField(default='checkpoints/mvs.pt')

    def validate(self, attrs):
        if attrs['lambda_sds'] == 0 and attrs['lambda_view'] == 0:
            raise serializers.ValidationError('At least one of lambda_sds and lambda_view must be positive')
        return attrs

    def create(self, validated_data):
        return dict(validated_data)
