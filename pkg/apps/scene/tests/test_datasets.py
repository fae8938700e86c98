import pytest
import torch

from core.exceptions import ContractError
from core.utils.images import to_uint8
from apps.scene.assets import AssetSpec, build_asset
from apps.scene.cameras import FRONT, SIDE, BACK
from apps.scene.datasets import (
    BALANCED,
    DatasetConfig,
    MultiViewDataset,
    generate_dataset,
    plan_views,
)
from apps.scene.exceptions import InvalidAssetSpecException
from apps.scene.serializers import DatasetConfigSerializer
from apps.harness.metrics import marker_pixels
from .factories import DatasetConfigFactory


class TestAssetSpec:
    def test_unknown_shape(self):
        with pytest.raises(InvalidAssetSpecException):
            AssetSpec('blob', 'torus', (0.5, 0.5, 0.5))

    def test_colour_range(self):
        with pytest.raises(ContractError):
            AssetSpec('blob', 'sphere', (1.5, 0.5, 0.5))

    def test_mirrored_adds_back_marker(self):
        spec = AssetSpec('orb', 'sphere', (0.9, 0.5, 0.1))
        assert spec.mirrored().marker_azimuths == (0.0, 180.0)

    def test_build_asset_is_opaque_at_centre(self):
        scene = build_asset(AssetSpec('crate', 'box', (0.1, 0.6, 0.6)), grid_size=16)
        centre = scene.density()[8, 8, 8].item()
        corner = scene.density()[0, 0, 0].item()
        assert centre > 30.0
        assert corner < 1e-6


class TestDatasetConfig:
    def test_needs_two_classes(self):
        with pytest.raises(ContractError):
            DatasetConfig(classes=(AssetSpec('orb', 'sphere', (0.9, 0.5, 0.1)),))

    def test_overhead_weight_rejected(self):
        with pytest.raises(ContractError):
            DatasetConfig(bucket_weights={FRONT: 0.5, SIDE: 0.2, BACK: 0.1, 'overhead': 0.2})


class TestPlanViews:
    def test_front_fraction(self):
        config = DatasetConfig(objects_per_class=50, views_per_object=50)
        buckets = [camera.bucket for plan in plan_views(config, seed=0) for camera in plan.cameras]
        assert len(buckets) == 10_000
        assert buckets.count(FRONT) / len(buckets) == pytest.approx(0.7, abs=0.03)

    def test_balanced_preset(self):
        config = DatasetConfig(objects_per_class=25, views_per_object=40, bucket_weights=dict(BALANCED))
        buckets = [camera.bucket for plan in plan_views(config, seed=1) for camera in plan.cameras]
        assert buckets.count(SIDE) / len(buckets) == pytest.approx(0.5, abs=0.03)

    def test_object_ids_are_unique(self):
        plans = plan_views(DatasetConfig(objects_per_class=3), seed=2)
        ids = [plan.instance.object_id for plan in plans]
        assert len(ids) == len(set(ids)) == 12


class TestGenerateDataset:
    def test_deterministic_per_seed(self):
        config = DatasetConfigFactory()
        first = generate_dataset(config, seed=3)
        second = generate_dataset(config, seed=3)
        assert torch.equal(first.images, second.images)
        assert first.records == second.records

    def test_records(self):
        dataset = generate_dataset(DatasetConfigFactory(), seed=0)
        assert len(dataset) == 6
        assert dataset.labels == ['crate', 'orb']
        assert dataset.images.shape == (6, 3, 16, 16)
        assert set(dataset.indices_by_object()) == {'orb-000', 'crate-000'}

    def test_marker_faces_front_only(self):
        config = DatasetConfig(objects_per_class=1, views_per_object=12, bucket_weights=dict(BALANCED))
        dataset = generate_dataset(config, seed=0)
        counts = marker_pixels(dataset.images)
        front = [count for count, record in zip(counts, dataset.records) if record.bucket == FRONT]
        back = [count for count, record in zip(counts, dataset.records) if record.bucket == BACK]
        assert front and back
        assert all(count > 0 for count in front)
        assert all(count == 0 for count in back)

    def test_save_and_load(self, tmp_path):
        dataset = generate_dataset(DatasetConfigFactory(), seed=0)
        dataset.save(tmp_path)
        assert (tmp_path / 'manifest.csv').is_file()
        loaded = MultiViewDataset.load(tmp_path)
        assert [r.object_id for r in loaded.records] == [r.object_id for r in dataset.records]
        assert loaded.records[0].camera.azimuth == pytest.approx(dataset.records[0].camera.azimuth)
        for original, restored in zip(dataset.images, loaded.images):
            assert (to_uint8(original) == to_uint8(restored)).all()

    def test_load_missing_manifest(self, tmp_path):
        with pytest.raises(ContractError):
            MultiViewDataset.load(tmp_path)


class TestDatasetConfigSerializer:
    def test_defaults(self):
        serializer = DatasetConfigSerializer(data={})
        assert serializer.is_valid(), serializer.errors
        config = serializer.save()
        assert config.bucket_weights[FRONT] == 0.7
        assert len(config.classes) == 4

    def test_custom_classes(self):
        serializer = DatasetConfigSerializer(data={
            'classes': [
                {'name': 'a', 'shape': 'sphere', 'color': [0.1, 0.2, 0.3]},
                {'name': 'b', 'shape': 'capsule', 'color': [0.3, 0.2, 0.1]},
            ],
            'preset': 'balanced',
        })
        assert serializer.is_valid(), serializer.errors
        config = serializer.save()
        assert [spec.name for spec in config.classes] == ['a', 'b']
        assert config.bucket_weights[SIDE] == 0.5

    def test_single_class_rejected(self):
        serializer = DatasetConfigSerializer(data={
            'classes': [{'name': 'a', 'shape': 'sphere', 'color': [0.1, 0.2, 0.3]}],
        })
        assert not serializer.is_valid()
        assert 'classes' in serializer.errors
