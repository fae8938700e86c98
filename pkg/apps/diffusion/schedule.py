"""
Variance-preserving cosine noise schedule with continuous t in [0, 1]:

    α_t = cos(π/2 · (t + s)/(1 + s)) / cos(π/2 · s/(1 + s)),   σ_t = sqrt(1 − α_t²)

clamped so α_t never drops below `alpha_floor`.
"""
import math
from dataclasses import dataclass, asdict

import torch

from core.exceptions import ContractError, DomainError


@dataclass(frozen=True)
class NoiseSchedule:
    num_steps: int = 1000
    offset: float = 0.008
    alpha_floor: float = 1e-4

    def __post_init__(self):
        if self.num_steps < 1:
            raise DomainError('num_steps must be positive')

    def alpha(self, t):
        if not 0.0 <= t <= 1.0:
            raise DomainError(f"t={t} outside [0, 1]")
        s = self.offset
        value = math.cos(math.pi / 2 * (t + s) / (1 + s)) / math.cos(math.pi / 2 * s / (1 + s))
        return min(1.0, max(self.alpha_floor, value))

    def sigma(self, t):
        return math.sqrt(1.0 - self.alpha(t) ** 2)

    def at(self, t):
        alpha = self.alpha(t)
        return alpha, math.sqrt(1.0 - alpha ** 2)

    def alpha_tensor(self, t):
        """Vectorised α for a tensor of timesteps"""
        if (t < 0).any() or (t > 1).any():
            raise DomainError('Timesteps outside [0, 1]')
        s = self.offset
        value = torch.cos(math.pi / 2 * (t + s) / (1 + s)) / math.cos(math.pi / 2 * s / (1 + s))
        return value.clamp(self.alpha_floor, 1.0)

    def describe(self):
        return {'law': 'cosine', **asdict(self)}

    @classmethod
    def from_descriptor(cls, descriptor):
        if descriptor.get('law') != 'cosine':
            raise ContractError(f"Unsupported schedule law {descriptor.get('law')!r}")
        return cls(descriptor['num_steps'], descriptor['offset'], descriptor['alpha_floor'])


DEFAULT_SCHEDULE = NoiseSchedule()


def schedule_at(schedule, t):
    """(α_t, σ_t) with α_t² + σ_t² = 1"""
    return schedule.at(t)


def diffuse(x0, alpha, sigma, eps):
    if x0.shape != eps.shape:
        raise ContractError(f"Noise shape {tuple(eps.shape)} does not match image shape {tuple(x0.shape)}")
    return alpha * x0 + sigma * eps


def forward_diffuse(x0, t, eps, schedule=DEFAULT_SCHEDULE):
    """x_t = α_t·x0 + σ_t·eps"""
    alpha, sigma = schedule.at(t)
    return diffuse(x0, alpha, sigma, eps)


def batch_diffuse(x0, t, eps, schedule=DEFAULT_SCHEDULE):
    """Forward diffusion with a per-sample t tensor [B]"""
    if x0.shape != eps.shape:
        raise ContractError('Noise shape does not match image shape')
    alphas = schedule.alpha_tensor(t.to(x0.dtype))
    sigmas = torch.sqrt(1.0 - alphas ** 2)
    view = (-1,) + (1,) * (x0.dim() - 1)
    return alphas.view(view) * x0 + sigmas.view(view) * eps


def cfg_combine(eps_cond, eps_uncond, s):
    """(1 + s)·eps_cond − s·eps_uncond"""
    if s < 0:
        raise DomainError(f"Guidance scale must be non-negative, got {s}")
    if eps_cond.shape != eps_uncond.shape:
        raise ContractError('Conditional and unconditional predictions differ in shape')
    if s == 0:
        return eps_cond.clone()
    return (1.0 + s) * eps_cond - s * eps_uncond
