"""
Camera model.

Convention: right-handed world, +Z up, cameras look at the origin, azimuth 0
lies on +X and grows towards +Y. Camera space follows the OpenGL layout
(x right, y up, looking down -z).
"""
import math
from dataclasses import dataclass

import numpy as np
import torch

from .exceptions import InvalidCameraException, EmptyCameraRangeException

ELEVATION_MIN = -30.0
ELEVATION_MAX = 60.0

FRONT = 'front'
SIDE = 'side'
BACK = 'back'
OVERHEAD = 'overhead'
VIEW_BUCKETS = (FRONT, SIDE, BACK, OVERHEAD)

WORLD_UP = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class Camera:
    azimuth: float
    elevation: float
    radius: float
    fov: float = 40.0

    def __post_init__(self):
        object.__setattr__(self, 'azimuth', float(self.azimuth) % 360.0)
        if not ELEVATION_MIN <= self.elevation <= ELEVATION_MAX:
            raise InvalidCameraException(
                f"Elevation {self.elevation} outside [{ELEVATION_MIN}, {ELEVATION_MAX}]"
            )
        if self.radius <= 0:
            raise InvalidCameraException('Camera radius must be positive')
        if not 0 < self.fov < 180:
            raise InvalidCameraException('Field of view must lie in (0, 180) degrees')

    @property
    def eye(self):
        azimuth = math.radians(self.azimuth)
        elevation = math.radians(self.elevation)
        return self.radius * np.array([
            math.cos(elevation) * math.cos(azimuth),
            math.cos(elevation) * math.sin(azimuth),
            math.sin(elevation),
        ])

    def rotation(self):
        """World-to-camera rotation; rows are (right, up, -forward)"""
        forward = -self.eye / np.linalg.norm(self.eye)
        right = np.cross(forward, WORLD_UP)
        right /= np.linalg.norm(right)
        up = np.cross(right, forward)
        return np.stack([right, up, -forward])

    def world_to_camera(self):
        """4x4 float64 transform T with T @ [p, 1] giving camera coordinates"""
        rotation = self.rotation()
        transform = np.eye(4)
        transform[:3, :3] = rotation
        transform[:3, 3] = -rotation @ self.eye
        return transform

    @property
    def bucket(self):
        return view_bucket(self.azimuth, self.elevation)


def relative_transform(c_j, c_i):
    """Δ(c_j, c_i) = T(c_j) · T(c_i)⁻¹, mapping camera-i coordinates to camera-j coordinates"""
    return c_j.world_to_camera() @ np.linalg.inv(c_i.world_to_camera())


def pose_features(c_j, c_i, dtype=torch.float32):
    """Flattened Δ(c_j, c_i) with translation scaled by the source radius"""
    delta = relative_transform(c_j, c_i).copy()
    delta[:3, 3] /= c_i.radius
    return torch.as_tensor(delta.reshape(-1), dtype=dtype)


def view_bucket(azimuth, elevation=0.0):
    """Directional bucket with edges at 45/135/225/315 degrees; steep views are overhead"""
    if elevation > ELEVATION_MAX:
        return OVERHEAD
    azimuth = float(azimuth) % 360.0
    if azimuth >= 315.0 or azimuth < 45.0:
        return FRONT
    if 135.0 <= azimuth < 225.0:
        return BACK
    return SIDE


def azimuth_gap(a, b):
    """Smallest absolute angular difference in degrees"""
    diff = abs(float(a) - float(b)) % 360.0
    return min(diff, 360.0 - diff)


@dataclass(frozen=True)
class CameraRanges:
    azimuth: tuple = (0.0, 360.0)
    elevation: tuple = (0.0, 30.0)
    radius: tuple = (3.0, 3.0)
    fov: float = 40.0

    def __post_init__(self):
        for name in ('azimuth', 'elevation', 'radius'):
            low, high = getattr(self, name)
            if high < low:
                raise EmptyCameraRangeException(f"{name} range [{low}, {high}] is empty")
            object.__setattr__(self, name, (float(low), float(high)))
        if self.elevation[0] < ELEVATION_MIN or self.elevation[1] > ELEVATION_MAX:
            raise InvalidCameraException(f"Elevation range must lie within [{ELEVATION_MIN}, {ELEVATION_MAX}]")
        if self.radius[0] <= 0:
            raise InvalidCameraException('Radius range must be positive')

    def contains(self, camera, tolerance=1e-6):
        elevation_ok = self.elevation[0] - tolerance <= camera.elevation <= self.elevation[1] + tolerance
        radius_ok = self.radius[0] - tolerance <= camera.radius <= self.radius[1] + tolerance
        return elevation_ok and radius_ok


def _uniform(generator, low, high):
    if high == low:
        return low
    return low + (high - low) * torch.rand(1, generator=generator, dtype=torch.float64).item()


def sample_camera(ranges, generator):
    """
    Draw one camera with each coordinate uniform over its range.

    A degenerate range [a, a] always yields a.
    """
    azimuth = _uniform(generator, *ranges.azimuth)
    elevation = _uniform(generator, *ranges.elevation)
    radius = _uniform(generator, *ranges.radius)
    return Camera(azimuth, elevation, radius, ranges.fov)


def orbit_cameras(count, ranges, generator):
    """
    `count` cameras equally spaced in azimuth from a random offset, sharing
    one elevation and radius; returned in azimuth-ring order.
    """
    if count < 1:
        raise InvalidCameraException('An orbit needs at least one camera')
    offset = _uniform(generator, 0.0, 360.0)
    elevation = _uniform(generator, *ranges.elevation)
    radius = _uniform(generator, *ranges.radius)
    stride = 360.0 / count
    return [Camera(offset + i * stride, elevation, radius, ranges.fov) for i in range(count)]
