from rest_framework import serializers

from core.exceptions import ContractError
from .energies import ENERGIES
from .services import ClassifierTrainingConfig, SynthTrainingConfig, TranslatorTrainingConfig


class TrainingSectionSerializer(serializers.Serializer):
    """Common fields of the view-aware model sections"""
    config_class = None
    default_checkpoint = None

    dataset = serializers.CharField(default='data/balanced')
    checkpoint = serializers.CharField(required=False)
    steps = serializers.IntegerField(min_value=1, required=False)
    lr = serializers.FloatField(min_value=0.0, required=False)
    width = serializers.IntegerField(min_value=8, required=False)
    validation_fraction = serializers.FloatField(min_value=0.0, max_value=0.9, required=False)
    eval_every = serializers.IntegerField(min_value=1, required=False)

    def create(self, validated_data):
        data = dict(validated_data)
        dataset = data.pop('dataset')
        checkpoint = data.pop('checkpoint', self.default_checkpoint)
        try:
            config = self.config_class(**data)
        except ContractError as exc:
            raise serializers.ValidationError(exc.detail)
        return {'config': config, 'dataset': dataset, 'checkpoint': checkpoint}


class ClassifierSectionSerializer(TrainingSectionSerializer):
    """Serializer for the `classifier` section"""
    config_class = ClassifierTrainingConfig
    default_checkpoint = 'checkpoints/classifier.pt'

    batch_size = serializers.IntegerField(min_value=2, required=False)
    weight_decay = serializers.FloatField(min_value=0.0, required=False)
    noise_max = serializers.FloatField(min_value=0.0, max_value=1.0, required=False)
    validation_pairs = serializers.IntegerField(min_value=2, required=False)


class TranslatorSectionSerializer(TrainingSectionSerializer):
    """Serializer for the `translator` section"""
    config_class = TranslatorTrainingConfig
    default_checkpoint = 'checkpoints/translator.pt'

    batch_size = serializers.IntegerField(min_value=1, required=False)
    noise_max = serializers.FloatField(min_value=0.0, max_value=1.0, required=False)
    validation_triples = serializers.IntegerField(min_value=1, required=False)


class SynthSectionSerializer(TrainingSectionSerializer):
    """Serializer for the `mvs` section"""
    config_class = SynthTrainingConfig
    default_checkpoint = 'checkpoints/mvs.pt'

    batch_objects = serializers.IntegerField(min_value=1, required=False)
    group_size = serializers.IntegerField(min_value=1, max_value=8, required=False)
    latent_dim = serializers.IntegerField(min_value=1, required=False)
    latent_reg = serializers.FloatField(min_value=0.0, required=False)


class EnergySerializer(serializers.Serializer):
    """Serializer for `distill.energy`"""
    name = serializers.ChoiceField(choices=sorted(ENERGIES), default='zero')
    weight = serializers.FloatField(min_value=0.0, default=1.0)
    kappa = serializers.FloatField(min_value=0.0, default=0.5)
    checkpoint = serializers.CharField(required=False, allow_null=True, default=None)
    reference = serializers.CharField(default='random')

    def validate_kappa(self, value):
        if value <= 0:
            raise serializers.ValidationError('kappa must be positive')
        return value

    def validate_reference(self, value):
        if value != 'random' and not value.isdigit():
            raise serializers.ValidationError("reference must be 'random' or a view index")
        return value

    def validate(self, attrs):
        if attrs['name'] in ('cls', 'i2i', 'mvs') and not attrs.get('checkpoint'):
            raise serializers.ValidationError({'checkpoint': f"The {attrs['name']} energy needs a checkpoint"})
        return attrs

    def create(self, validated_data):
        return dict(validated_data)
