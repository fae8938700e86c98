"""
Iteration-indexed training policies: warmup mode, timestep annealing,
resolution staging, CFG switching and geometry fading.

Every function here is a pure function of (config, iter); timestep_at draws
from the generator it is handed.
"""
from dataclasses import dataclass, field, asdict

import torch

from core.exceptions import ConfigError, ContractError

WARMUP_SDS = 'warmup_sds'
JSD = 'jsd'

DEFAULT_WARMUP_FRACTION = 0.1
DEFAULT_ANNEAL_FRACTION = 0.5
DEFAULT_SWITCH_FRACTION = 5.0 / 6.0


def _check_stages(stages):
    if not stages:
        raise ConfigError('resolution_stages must not be empty')
    starts = [start for start, _ in stages]
    if starts[0] != 0:
        raise ConfigError('The first resolution stage must start at iteration 0')
    if any(later <= earlier for earlier, later in zip(starts, starts[1:])):
        raise ConfigError('resolution_stages must be sorted by strictly increasing start_iter')
    for _, (height, width) in stages:
        if height < 8 or width < 8:
            raise ConfigError('Stage resolutions must be at least 8x8')


def default_stages(anneal_iter, switch_iter, resolutions=((16, 16), (32, 32), (64, 64))):
    """Stages starting at 0, anneal_iter and switch_iter"""
    starts = [0, anneal_iter, switch_iter][:len(resolutions)]
    stages = []
    for start, resolution in zip(starts, resolutions):
        if stages and start <= stages[-1][0]:
            # Collapsed boundaries on very short runs keep the later stage
            stages[-1] = (stages[-1][0], tuple(resolution))
            continue
        stages.append((start, tuple(resolution)))
    return tuple(stages)


@dataclass(frozen=True)
class ScheduleConfig:
    total_iters: int
    warmup_iters: int
    anneal_iter: int
    switch_iter: int
    cfg_before: float = 30.0
    cfg_after: float = 50.0
    density_lr_before: float = 1e-2
    density_lr_after: float = 1e-6
    orientation_weight_before: float = 0.1
    orientation_weight_after: float = 0.0
    t_fixed: float = 0.98
    t_range_after: tuple = (0.02, 0.50)
    resolution_stages: tuple = field(default=((0, (16, 16)),))

    def __post_init__(self):
        stages = tuple((int(start), (int(res[0]), int(res[1]))) for start, res in self.resolution_stages)
        object.__setattr__(self, 'resolution_stages', stages)
        object.__setattr__(self, 't_range_after', tuple(float(v) for v in self.t_range_after))

        if self.total_iters < 1:
            raise ConfigError('total_iters must be positive')
        if not 0 <= self.warmup_iters <= self.anneal_iter <= self.switch_iter <= self.total_iters:
            raise ConfigError(
                'Expected 0 <= warmup_iters <= anneal_iter <= switch_iter <= total_iters, got '
                f'{self.warmup_iters}/{self.anneal_iter}/{self.switch_iter}/{self.total_iters}'
            )
        if self.cfg_before < 0 or self.cfg_after < 0:
            raise ConfigError('CFG scales must be non-negative')
        if self.density_lr_before <= 0 or self.density_lr_after <= 0:
            raise ConfigError('Density learning rates must be positive')
        if self.orientation_weight_before < 0 or self.orientation_weight_after < 0:
            raise ConfigError('Orientation weights must be non-negative')
        low, high = self.t_range_after
        if not 0.0 <= low <= high <= 1.0:
            raise ConfigError('t_range_after must satisfy 0 <= low <= high <= 1')
        if not 0.0 <= self.t_fixed <= 1.0:
            raise ConfigError('t_fixed must lie in [0, 1]')
        _check_stages(self.resolution_stages)

    @classmethod
    def from_fractions(cls, total_iters, warmup_fraction=DEFAULT_WARMUP_FRACTION,
                       anneal_fraction=DEFAULT_ANNEAL_FRACTION, switch_fraction=DEFAULT_SWITCH_FRACTION,
                       resolutions=((16, 16), (32, 32), (64, 64)), **overrides):
        """
        Build a config whose phase boundaries scale with the run length.

        The three default resolutions start at 0, anneal_iter and switch_iter;
        a single resolution gives one constant stage.
        """
        warmup = int(round(warmup_fraction * total_iters))
        anneal = int(round(anneal_fraction * total_iters))
        switch = int(round(switch_fraction * total_iters))
        if 'resolution_stages' not in overrides:
            overrides['resolution_stages'] = default_stages(anneal, switch, resolutions)
        return cls(total_iters=total_iters, warmup_iters=warmup, anneal_iter=anneal,
                   switch_iter=switch, **overrides)

    def as_dict(self):
        data = asdict(self)
        data['resolution_stages'] = [[start, list(res)] for start, res in self.resolution_stages]
        data['t_range_after'] = list(self.t_range_after)
        return data


def _check_iter(cfg, iteration):
    if not 0 <= iteration < cfg.total_iters:
        raise ContractError(f"Iteration {iteration} outside [0, {cfg.total_iters})")


def mode_at(cfg, iteration):
    _check_iter(cfg, iteration)
    return WARMUP_SDS if iteration < cfg.warmup_iters else JSD


def cfg_scale_at(cfg, iteration):
    _check_iter(cfg, iteration)
    return cfg.cfg_before if iteration < cfg.switch_iter else cfg.cfg_after


def timestep_at(cfg, iteration, generator):
    """t_fixed before annealing, afterwards one uniform draw from t_range_after"""
    _check_iter(cfg, iteration)
    if iteration < cfg.anneal_iter:
        return cfg.t_fixed
    low, high = cfg.t_range_after
    draw = torch.rand(1, generator=generator, dtype=torch.float64).item()
    return low + (high - low) * draw


def geometry_lr_at(cfg, iteration):
    """(density learning rate, orientation weight) under geometry fading"""
    _check_iter(cfg, iteration)
    if iteration < cfg.switch_iter:
        return cfg.density_lr_before, cfg.orientation_weight_before
    return cfg.density_lr_after, cfg.orientation_weight_after


def resolution_at(cfg, iteration):
    _check_iter(cfg, iteration)
    _check_stages(cfg.resolution_stages)
    current = cfg.resolution_stages[0][1]
    for start, resolution in cfg.resolution_stages:
        if start <= iteration:
            current = resolution
        else:
            break
    return current


def resolve(cfg, iteration, generator):
    """All scheduled quantities for one step, as logged to the run CSV"""
    density_lr, orientation_weight = geometry_lr_at(cfg, iteration)
    return {
        'mode': mode_at(cfg, iteration),
        'cfg_scale': cfg_scale_at(cfg, iteration),
        't': timestep_at(cfg, iteration, generator),
        'resolution': resolution_at(cfg, iteration),
        'density_lr': density_lr,
        'orientation_weight': orientation_weight,
    }
