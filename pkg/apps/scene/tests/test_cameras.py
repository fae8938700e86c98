import numpy as np
import pytest
import torch
from scipy import stats

from core.exceptions import ContractError
from apps.scene.cameras import (
    Camera,
    CameraRanges,
    FRONT,
    SIDE,
    BACK,
    OVERHEAD,
    orbit_cameras,
    relative_transform,
    sample_camera,
    view_bucket,
)
from apps.scene.exceptions import EmptyCameraRangeException, InvalidCameraException
from .factories import CameraFactory


class TestCamera:
    def test_azimuth_is_normalised(self):
        assert Camera(-30.0, 0.0, 3.0).azimuth == pytest.approx(330.0)
        assert Camera(360.0, 0.0, 3.0).azimuth == 0.0

    @pytest.mark.parametrize('elevation', [-31.0, 61.0])
    def test_elevation_range(self, elevation):
        with pytest.raises(InvalidCameraException):
            Camera(0.0, elevation, 3.0)

    def test_invalid_camera_is_contract_error(self):
        with pytest.raises(ContractError):
            Camera(0.0, 0.0, -1.0)

    def test_rotation_is_orthonormal(self):
        for camera in CameraFactory.build_batch(12):
            rotation = camera.world_to_camera()[:3, :3]
            assert np.linalg.norm(rotation.T @ rotation - np.eye(3)) < 1e-6

    def test_origin_maps_to_negative_z(self):
        camera = Camera(70.0, 25.0, 3.0)
        point = camera.world_to_camera() @ np.array([0.0, 0.0, 0.0, 1.0])
        np.testing.assert_allclose(point[:3], [0.0, 0.0, -3.0], atol=1e-12)


class TestRelativeTransform:
    def test_same_camera_is_identity(self):
        camera = Camera(123.0, 17.0, 2.5)
        np.testing.assert_allclose(relative_transform(camera, camera), np.eye(4), atol=1e-9)

    def test_inverse_composition(self):
        c_i, c_j = Camera(10.0, 5.0, 3.0), Camera(200.0, 40.0, 2.2)
        product = relative_transform(c_j, c_i) @ relative_transform(c_i, c_j)
        np.testing.assert_allclose(product, np.eye(4), atol=1e-7)

    def test_quarter_turn_about_up_axis(self):
        delta = relative_transform(Camera(90.0, 0.0, 3.0), Camera(0.0, 0.0, 3.0))
        expected = np.array([
            [0.0, 0.0, -1.0],
            [0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0],
        ])
        np.testing.assert_allclose(delta[:3, :3], expected, atol=1e-6)

    def test_quarter_turn_at_shared_elevation(self):
        c_i, c_j = Camera(30.0, 25.0, 3.0), Camera(120.0, 25.0, 3.0)
        rotation = relative_transform(c_j, c_i)[:3, :3]
        up_in_camera = c_i.rotation() @ np.array([0.0, 0.0, 1.0])
        np.testing.assert_allclose(rotation @ up_in_camera, up_in_camera, atol=1e-9)
        assert np.trace(rotation) == pytest.approx(1.0, abs=1e-9)


class TestViewBucket:
    @pytest.mark.parametrize('azimuth, bucket', [
        (0.0, FRONT), (44.9, FRONT), (315.0, FRONT), (45.0, SIDE), (134.9, SIDE),
        (135.0, BACK), (224.9, BACK), (225.0, SIDE), (314.9, SIDE),
    ])
    def test_edges(self, azimuth, bucket):
        assert view_bucket(azimuth, 10.0) == bucket

    def test_steep_views_are_overhead(self):
        assert view_bucket(0.0, 61.0) == OVERHEAD


class TestSampleCamera:
    def test_degenerate_range(self):
        ranges = CameraRanges(azimuth=(30.0, 30.0))
        generator = torch.Generator().manual_seed(0)
        assert {sample_camera(ranges, generator).azimuth for _ in range(20)} == {30.0}

    def test_azimuth_uniformity(self):
        generator = torch.Generator().manual_seed(0)
        ranges = CameraRanges()
        azimuths = np.array([sample_camera(ranges, generator).azimuth for _ in range(10_000)])
        counts, _ = np.histogram(azimuths, bins=36, range=(0.0, 360.0))
        assert stats.chisquare(counts).pvalue > 0.01

    def test_same_seed_same_sequence(self):
        ranges = CameraRanges(elevation=(-10.0, 40.0), radius=(2.5, 3.5))
        generator_a, generator_b = torch.Generator().manual_seed(9), torch.Generator().manual_seed(9)
        a = [sample_camera(ranges, generator_a) for _ in range(50)]
        b = [sample_camera(ranges, generator_b) for _ in range(50)]
        assert a == b
        assert all(2.5 <= camera.radius <= 3.5 for camera in a)

    def test_empty_range(self):
        with pytest.raises(EmptyCameraRangeException):
            CameraRanges(azimuth=(90.0, 10.0))


class TestOrbitCameras:
    def test_equal_spacing_shared_elevation(self):
        cameras = orbit_cameras(4, CameraRanges(), torch.Generator().manual_seed(3))
        assert len({camera.elevation for camera in cameras}) == 1
        for previous, current in zip(cameras, cameras[1:]):
            assert (current.azimuth - previous.azimuth) % 360.0 == pytest.approx(90.0)
