"""
Run metrics: the marker-based Janus detector and loss smoothness.

Metrics only read run artifacts; they never write into a run directory.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
from django.conf import settings
from numpy.lib.stride_tricks import sliding_window_view

from core.exceptions import ContractError
from core.utils.csvlog import read_rows
from apps.scene.services import SceneService
from apps.schedules.policies import WARMUP_SDS
from .exceptions import MissingRunArtifactException, ShortSeriesException
from .turntable import render_turntable

logger = logging.getLogger(__name__)

FINAL_SCENE = Path('checkpoints') / 'scene_final.pt'
STEPS_CSV = 'steps.csv'

# Marker oracle thresholds on rendered RGB in [0, 1]
MARKER_MIN_RED = 0.75
MARKER_MAX_GREEN = 0.25
MARKER_MIN_BLUE = 0.75


@dataclass(frozen=True)
class DetectorSettings:
    frames: int = 36
    elevation: float = 15.0
    resolution: int = 64
    min_marker_pixels: int = 6
    relative_threshold: float = 0.3
    radius: float = 3.0
    samples_per_ray: int = 64

    def __post_init__(self):
        if self.frames < 2:
            raise ContractError('The Janus detector needs at least two frames')
        if self.min_marker_pixels < 1:
            raise ContractError('min_marker_pixels must be positive')
        if not 0.0 <= self.relative_threshold < 1.0:
            raise ContractError('relative_threshold must lie in [0, 1)')

    @classmethod
    def from_settings(cls, **overrides):
        lab = settings.LAB['JANUS']
        values = {
            'frames': lab['FRAMES'],
            'elevation': lab['ELEVATION'],
            'resolution': lab['RESOLUTION'],
            'min_marker_pixels': lab['MIN_MARKER_PIXELS'],
            'relative_threshold': lab['RELATIVE_THRESHOLD'],
            'radius': settings.LAB['RENDER']['RADIUS'],
            'samples_per_ray': settings.LAB['RENDER']['SAMPLES_PER_RAY'],
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)


@dataclass
class JanusResult:
    source: str
    detections: List[bool]
    arcs: List[tuple]
    positive: bool
    marker_pixels: List[int] = field(default_factory=list)


@dataclass
class JanusReport:
    rate: float
    runs: List[JanusResult]

    def as_dict(self):
        return {
            'rate': self.rate,
            'runs': [{'source': r.source, 'positive': r.positive, 'arcs': [list(a) for a in r.arcs]}
                     for r in self.runs],
        }


def marker_pixels(images):
    """Marker-coloured pixel count per image of a (N, 3, H, W) batch"""
    red, green, blue = images[:, 0], images[:, 1], images[:, 2]
    mask = (red > MARKER_MIN_RED) & (green < MARKER_MAX_GREEN) & (blue > MARKER_MIN_BLUE)
    return mask.flatten(1).sum(dim=1).tolist()


def detection_arcs(detections):
    """
    Runs of consecutive detections on the circular frame sequence, as
    (start_frame, length) pairs; a run crossing frame 0 counts once.
    """
    count = len(detections)
    if not any(detections):
        return []
    if all(detections):
        return [(0, count)]
    start = next(i for i in range(count) if not detections[i])
    arcs = []
    current = None
    for offset in range(1, count + 1):
        frame = (start + offset) % count
        if detections[frame]:
            if current is None:
                current = [frame, 0]
            current[1] += 1
        elif current is not None:
            arcs.append(tuple(current))
            current = None
    return arcs


def is_janus(arcs, frames):
    """Two or more disjoint marker arcs, or one spanning more than half the turn"""
    return len(arcs) >= 2 or any(length * 360.0 / frames > 180.0 for _, length in arcs)


def frame_threshold(counts, detector):
    """
    Marker pixels a frame needs to count as a detection: a fixed floor, or a
    fraction of the scene's own head-on marker area when that is larger.
    Small-bodied classes show proportionally small markers.
    """
    peak = max(counts) if counts else 0
    return max(detector.min_marker_pixels, detector.relative_threshold * peak)


def detect_janus(scene, detector=None, source=''):
    detector = detector or DetectorSettings.from_settings()
    images = render_turntable(scene, detector.frames, detector.resolution, detector.elevation,
                              detector.radius, detector.samples_per_ray)
    counts = marker_pixels(images)
    threshold = frame_threshold(counts, detector)
    detections = [count >= threshold for count in counts]
    arcs = detection_arcs(detections)
    return JanusResult(source, detections, arcs, is_janus(arcs, detector.frames), counts)


def final_scene_path(run):
    """A run directory resolves to its final scene; a file is taken as the checkpoint"""
    path = Path(run)
    if path.is_dir():
        path = path / FINAL_SCENE
    if not path.is_file():
        raise MissingRunArtifactException(f"No final scene checkpoint at {path}")
    return path


def janus_rate(runs, detector=None):
    """
    Fraction of runs whose final scene is Janus-positive.

    Args:
        runs: Run directories or scene checkpoint paths
        detector: DetectorSettings, defaulting to settings.LAB['JANUS']
    """
    if not runs:
        raise ContractError('janus_rate needs at least one run')
    paths = [final_scene_path(run) for run in runs]
    results = []
    for path in paths:
        scene, _ = SceneService.load(path)
        result = detect_janus(scene, detector, str(path))
        logger.info(f"{path}: {len(result.arcs)} marker arc(s), janus={result.positive}")
        results.append(result)
    rate = sum(result.positive for result in results) / len(results)
    return JanusReport(rate, results)


@dataclass
class SmoothnessSummary:
    mean: float
    max: float
    rolling_std: np.ndarray
    rows_used: int

    def as_dict(self):
        return {'mean_rolling_std': self.mean, 'max_rolling_std': self.max, 'rows_used': self.rows_used}


def post_warmup_losses(rows):
    return [float(row['loss']) for row in rows if row.get('mode') != WARMUP_SDS]


def loss_smoothness(log, window=100, warmup_iters: Optional[int] = None):
    """
    Rolling population standard deviation of the loss after the warmup phase.

    Args:
        log: A run's step CSV path, a run directory, or already-read rows
        window: Rolling window length, at least 2
        warmup_iters: Rows to skip when the log carries no mode column
    """
    if window < 2:
        raise ContractError('The smoothing window must be at least 2')
    if isinstance(log, (str, Path)):
        path = Path(log)
        if path.is_dir():
            path = path / STEPS_CSV
        if not path.is_file():
            raise MissingRunArtifactException(f"No step log at {path}")
        rows = read_rows(path)
    else:
        rows = list(log)

    if warmup_iters is not None:
        rows = rows[warmup_iters:]
    losses = np.asarray(post_warmup_losses(rows), dtype=np.float64)
    if losses.size < window:
        raise ShortSeriesException(f"{losses.size} post-warmup rows, window {window}")

    rolling = sliding_window_view(losses, window).std(axis=-1)
    return SmoothnessSummary(float(rolling.mean()), float(rolling.max()), rolling, int(losses.size))
