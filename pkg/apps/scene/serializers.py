from rest_framework import serializers

from core.exceptions import ContractError
from .assets import AssetSpec, SHAPES, DEFAULT_CLASSES
from .cameras import CameraRanges, ELEVATION_MIN, ELEVATION_MAX
from .datasets import DatasetConfig, FRONT_BIASED, BALANCED

PRESETS = {
    'front_biased': FRONT_BIASED,
    'balanced': BALANCED,
}


class AssetSpecSerializer(serializers.Serializer):
    name = serializers.CharField(max_length=40)
    shape = serializers.ChoiceField(choices=SHAPES)
    color = serializers.ListField(
        child=serializers.FloatField(min_value=0.0, max_value=1.0), min_length=3, max_length=3,
    )
    marker_azimuths = serializers.ListField(child=serializers.FloatField(), default=[0.0])
    size = serializers.FloatField(min_value=0.1, max_value=1.5, default=1.0)

    def create(self, validated_data):
        return AssetSpec(
            name=validated_data['name'],
            shape=validated_data['shape'],
            color=tuple(validated_data['color']),
            marker_azimuths=tuple(validated_data['marker_azimuths']),
            size=validated_data['size'],
        )


class BucketWeightsSerializer(serializers.Serializer):
    front = serializers.FloatField(min_value=0.0)
    side = serializers.FloatField(min_value=0.0)
    back = serializers.FloatField(min_value=0.0)
    overhead = serializers.FloatField(min_value=0.0, default=0.0)


class DatasetConfigSerializer(serializers.Serializer):
    """Serializer for the `data` section"""
    classes = AssetSpecSerializer(many=True, required=False)
    objects_per_class = serializers.IntegerField(min_value=1, default=4)
    views_per_object = serializers.IntegerField(min_value=1, default=24)
    image_size = serializers.IntegerField(min_value=8, default=32)
    grid_size = serializers.IntegerField(min_value=8, default=32)
    samples_per_ray = serializers.IntegerField(min_value=16, default=64)
    preset = serializers.ChoiceField(choices=list(PRESETS), default='front_biased')
    bucket_weights = BucketWeightsSerializer(required=False)
    elevation = serializers.ListField(
        child=serializers.FloatField(min_value=ELEVATION_MIN, max_value=ELEVATION_MAX),
        min_length=2, max_length=2, default=[0.0, 30.0],
    )
    radius = serializers.FloatField(min_value=1.8, default=3.0)
    fov = serializers.FloatField(min_value=1.0, max_value=120.0, default=40.0)

    def validate_classes(self, value):
        if len(value) < 2:
            raise serializers.ValidationError('At least two shape classes are required')
        return value

    def create(self, validated_data):
        classes = DEFAULT_CLASSES
        if validated_data.get('classes'):
            classes = tuple(AssetSpecSerializer().create(item) for item in validated_data['classes'])
        weights = dict(validated_data.get('bucket_weights') or PRESETS[validated_data['preset']])
        try:
            return DatasetConfig(
                classes=classes,
                objects_per_class=validated_data['objects_per_class'],
                views_per_object=validated_data['views_per_object'],
                image_size=validated_data['image_size'],
                grid_size=validated_data['grid_size'],
                samples_per_ray=validated_data['samples_per_ray'],
                bucket_weights=weights,
                elevation=tuple(validated_data['elevation']),
                radius=validated_data['radius'],
                fov=validated_data['fov'],
            )
        except ContractError as exc:
            raise serializers.ValidationError(exc.detail)


class CameraRangesSerializer(serializers.Serializer):
    azimuth = serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2,
                                    default=[0.0, 360.0])
    elevation = serializers.ListField(
        child=serializers.FloatField(min_value=ELEVATION_MIN, max_value=ELEVATION_MAX),
        min_length=2, max_length=2, default=[0.0, 30.0],
    )
    radius = serializers.ListField(child=serializers.FloatField(min_value=0.0), min_length=2, max_length=2,
                                   default=[3.0, 3.0])
    fov = serializers.FloatField(min_value=1.0, max_value=120.0, default=40.0)

    def create(self, validated_data):
        try:
            return CameraRanges(
                azimuth=tuple(validated_data['azimuth']),
                elevation=tuple(validated_data['elevation']),
                radius=tuple(validated_data['radius']),
                fov=validated_data['fov'],
            )
        except ContractError as exc:
            raise serializers.ValidationError(exc.detail)
