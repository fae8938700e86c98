"""
Distillation runs: one seeded optimisation of a voxel scene against a prior,
with schedules applied per step and every consumed value logged.
"""
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import torch

from core.checkpoints import CheckpointService
from core.exceptions import ConfigError, NonFiniteGradientError
from core.rng import CAMERA_STREAM, TIMESTEP_STREAM, StepStreams
from core.utils.csvlog import CsvLog
from core.utils.decorators import log_duration
from apps.scene.cameras import CameraRanges, orbit_cameras
from apps.scene.grid import BACKGROUND, Scene
from apps.scene.rendering import RenderOptions, orientation_loss
from apps.scene.services import SceneService
from apps.schedules.policies import (
    WARMUP_SDS,
    ScheduleConfig,
    cfg_scale_at,
    geometry_lr_at,
    mode_at,
    resolution_at,
    timestep_at,
)
from apps.energy.energies import build_energy
from apps.energy.services import SynthService
from apps.distillation.gradients import combined_baseline_grad, jsd_grad, summed_sds_grad
from apps.distillation.priors import MultiViewSurrogatePrior, build_prior
from apps.distillation.surfaces import VoxelSurface
from apps.distillation.weighting import DistillationSettings
from .exceptions import UnknownMethodException
from .metrics import FINAL_SCENE, STEPS_CSV, detect_janus, DetectorSettings, loss_smoothness
from .turntable import export_turntable

logger = logging.getLogger(__name__)

SDS = 'sds'
JSD = 'jsd'
COMBINED = 'combined'
METHODS = (SDS, JSD, COMBINED)

STEP_COLUMNS = (
    'iter', 'loss', 'energy_value', 'cfg_scale', 't', 'resolution', 'density_lr',
    'orientation_weight', 'mode', 'residual_norm',
)
SUMMARY_FILE = 'summary.json'
LEARNED_ENERGIES = ('cls', 'i2i', 'mvs')


@dataclass(frozen=True)
class SceneSpec:
    grid_size: int = 32
    extent: float = 1.0
    background: tuple = BACKGROUND
    blob_radius: float = 0.5
    blob_peak: float = 2.0
    density_floor: float = -4.0
    dtype: str = 'float32'

    def build(self):
        return Scene.with_blob(grid_size=self.grid_size, extent=self.extent, radius=self.blob_radius,
                               peak=self.blob_peak, floor=self.density_floor, background=tuple(self.background),
                               dtype=getattr(torch, self.dtype))


@dataclass(frozen=True)
class RunConfig:
    label: str
    schedule: ScheduleConfig
    method: str = JSD
    views: int = 4
    energy: dict = field(default_factory=lambda: {'name': 'zero', 'weight': 1.0, 'kappa': 0.5,
                                                  'checkpoint': None, 'reference': 'random'})
    prior: dict = field(default_factory=lambda: {'name': 'denoiser', 'checkpoint': 'checkpoints/denoiser.pt'})
    baseline: Optional[dict] = None
    scene: SceneSpec = SceneSpec()
    cameras: CameraRanges = CameraRanges()
    color_lr: float = 1e-2
    betas: tuple = (0.9, 0.99)
    samples_per_ray: int = 32
    checkpoint_every: int = 0
    turntable_frames: int = 36
    turntable_resolution: int = 32

    def __post_init__(self):
        if self.method not in METHODS:
            raise UnknownMethodException(f"Unknown method {self.method!r}; choose from {METHODS}")
        if self.views < 1:
            raise ConfigError('views must be at least 1')
        if self.method == COMBINED and not self.baseline:
            raise ConfigError('The combined method needs a baseline section')
        if self.color_lr <= 0:
            raise ConfigError('color_lr must be positive')

    def checkpoints(self):
        """Checkpoint files the run reads"""
        paths = []
        if self.prior.get('name') == 'denoiser':
            paths.append(self.prior.get('checkpoint'))
        if self.method == JSD and self.energy.get('name') in LEARNED_ENERGIES:
            paths.append(self.energy.get('checkpoint'))
        if self.method == COMBINED:
            paths.append(self.baseline.get('checkpoint'))
        return [path for path in paths if path]

    def describe(self):
        data = asdict(self)
        data['schedule'] = self.schedule.as_dict()
        data['cameras'] = {key: list(value) if isinstance(value, tuple) else value
                           for key, value in asdict(self.cameras).items()}
        data['prior'] = {key: value for key, value in self.prior.items() if key != 'schedule'}
        return data


@dataclass
class RunArtifacts:
    directory: Path
    steps_csv: Path
    checkpoints: List[Path]
    final_scene: Path
    frames: List[Path]
    summary: Path
    rows: int


class DistillationRun:
    """Owns the scene, optimiser and models of one run"""

    def __init__(self, config, seed, directory):
        self.config = config
        self.seed = int(seed)
        self.directory = Path(directory)

        CheckpointService.require(config.checkpoints())
        self.prior, schedule = build_prior(
            config.prior.get('name', 'denoiser'),
            checkpoint=config.prior.get('checkpoint'),
            allow_untrained=config.prior.get('allow_untrained', False),
            value=config.prior.get('value', 0.0),
            view_conditioning=config.prior.get('view_conditioning', True),
        )
        if config.prior.get('schedule') is not None and config.prior.get('name') != 'denoiser':
            schedule = config.prior['schedule']
        self.settings = DistillationSettings(
            schedule=schedule,
            weighting=config.prior.get('weighting', 'sigma_sq'),
            energy_input=config.prior.get('energy_input', 'noised'),
        )
        self.model_resolution = getattr(self.prior, 'image_size', None)

        self.energy = None
        if config.method == JSD:
            energy = config.energy
            self.energy = build_energy(energy['name'], energy.get('weight', 1.0), energy.get('kappa', 0.5),
                                       energy.get('checkpoint'), config.label, energy.get('reference'), self.seed)
        self.view_prior = None
        if config.method == COMBINED:
            synth = SynthService.load(config.baseline['checkpoint'])
            self.view_prior = MultiViewSurrogatePrior(synth, self.seed, schedule)

        self.scene = config.scene.build()
        schedule_config = config.schedule
        density_lr, _ = geometry_lr_at(schedule_config, 0)
        self.optimizer = torch.optim.Adam([
            {'params': [self.scene.density_raw], 'lr': density_lr, 'name': 'density'},
            {'params': [self.scene.color_raw], 'lr': config.color_lr, 'name': 'color'},
        ], betas=tuple(config.betas))
        self._phase = {}

    def _log_phase(self, iteration, **values):
        for key, value in values.items():
            previous = self._phase.get(key)
            if previous is not None and previous != value:
                logger.info(f"Step {iteration}: {key} {previous} -> {value}")
            self._phase[key] = value

    def gradient(self, mode, surface, cameras, t, scale, streams):
        config = self.config
        if mode == WARMUP_SDS or config.method == SDS:
            return summed_sds_grad(surface, cameras, t, config.label, scale, self.prior, streams, self.settings)
        if config.method == JSD:
            return jsd_grad(surface, cameras, t, config.label, scale, self.prior, self.energy, streams,
                            self.settings)
        return combined_baseline_grad(surface, cameras, t, config.label, scale, self.prior, self.view_prior,
                                      config.baseline['lambda_sds'], config.baseline['lambda_view'], streams,
                                      self.settings)

    def step(self, iteration):
        """One optimisation step; returns the CSV row"""
        config = self.config
        cfg = config.schedule
        streams = StepStreams(self.seed, iteration)

        mode = mode_at(cfg, iteration)
        scale = cfg_scale_at(cfg, iteration)
        t = timestep_at(cfg, iteration, streams.aux(TIMESTEP_STREAM))
        density_lr, orientation_weight = geometry_lr_at(cfg, iteration)
        resolution = resolution_at(cfg, iteration)
        self._log_phase(iteration, mode=mode, cfg_scale=scale, density_lr=density_lr, resolution=resolution)

        for group in self.optimizer.param_groups:
            if group['name'] == 'density':
                group['lr'] = density_lr

        cameras = orbit_cameras(config.views, config.cameras, streams.aux(CAMERA_STREAM))
        options = RenderOptions(resolution=resolution, samples_per_ray=config.samples_per_ray, training=True)
        surface = VoxelSurface(self.scene, options, self.model_resolution)

        report = self.gradient(mode, surface, cameras, t, scale, streams)
        self.optimizer.zero_grad(set_to_none=True)
        report.apply_to(surface)

        if orientation_weight > 0:
            evaluation = options.at(training=False)
            penalty = sum(orientation_loss(self.scene, camera, evaluation) for camera in cameras) / len(cameras)
            (orientation_weight * penalty).backward()

        parameters = [self.scene.density_raw, self.scene.color_raw]
        if not all(p.grad is None or torch.isfinite(p.grad).all() for p in parameters):
            raise NonFiniteGradientError(iteration)
        self.optimizer.step()

        return {
            'iter': iteration,
            'loss': report.loss,
            'energy_value': report.energy_value,
            'cfg_scale': scale,
            't': t,
            'resolution': f"{resolution[0]}x{resolution[1]}",
            'density_lr': density_lr,
            'orientation_weight': orientation_weight,
            'mode': mode,
            'residual_norm': report.residual_norm,
        }

    def save_scene(self, name, iteration):
        path = self.directory / 'checkpoints' / name
        return SceneService.save(self.scene, path, {'iter': iteration, 'seed': self.seed,
                                                    'label': self.config.label, 'method': self.config.method})


@log_duration('distill')
def run_distillation(config, seed, directory):
    """
    Execute config.schedule.total_iters steps and write the run artifacts.

    Raises:
        CheckpointError: a referenced model checkpoint is missing (before step 0)
        NonFiniteGradientError: a step produced a non-finite gradient; the
            rows logged so far stay on disk
    """
    run = DistillationRun(config, seed, directory)
    directory = run.directory
    directory.mkdir(parents=True, exist_ok=True)
    total = config.schedule.total_iters
    logger.info(f"Distilling '{config.label}' with {config.method} for {total} steps (seed {seed})")

    checkpoints = []
    with CsvLog(directory / STEPS_CSV, STEP_COLUMNS) as log:
        for iteration in range(total):
            try:
                row = run.step(iteration)
            except NonFiniteGradientError:
                logger.error(f"Aborting at step {iteration}: non-finite gradient")
                raise
            log.write(row)
            if config.checkpoint_every and (iteration + 1) % config.checkpoint_every == 0 and iteration + 1 < total:
                checkpoints.append(run.save_scene(f"scene_{iteration + 1:05d}.pt", iteration + 1))
        rows = log.rows_written

    final = run.save_scene(FINAL_SCENE.name, total)
    frames = export_turntable(run.scene, config.turntable_frames, config.turntable_resolution,
                              directory / 'turntable', radius=config.cameras.radius[0])
    summary_path = directory / SUMMARY_FILE
    _write_summary(summary_path, run, rows, checkpoints + [final], frames)
    return RunArtifacts(directory, directory / STEPS_CSV, checkpoints, final, frames, summary_path, rows)


def _write_summary(path, run, rows, checkpoints, frames):
    config = run.config
    janus = detect_janus(run.scene, DetectorSettings.from_settings(), str(checkpoints[-1]))
    summary = {
        'seed': run.seed,
        'label': config.label,
        'method': config.method,
        'iterations': rows,
        'steps_csv': STEPS_CSV,
        'checkpoints': [str(Path(p).relative_to(run.directory)) for p in checkpoints],
        'turntable': [str(Path(p).relative_to(run.directory)) for p in frames],
        'janus': {'positive': janus.positive, 'arcs': [list(arc) for arc in janus.arcs]},
        'config': config.describe(),
    }
    window = min(100, rows - config.schedule.warmup_iters)
    if window >= 2:
        summary['smoothness'] = loss_smoothness(path.parent / STEPS_CSV, window).as_dict()
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(summary, handle, indent=2, sort_keys=True, default=str)
    return path
