"""
Time weighting w(t) and the knobs shared by every gradient estimator.
"""
from dataclasses import dataclass

from core.exceptions import ConfigError
from apps.diffusion.schedule import DEFAULT_SCHEDULE, NoiseSchedule

SIGMA_SQ = 'sigma_sq'
UNIT = 'unit'
SNR_INVERSE = 'snr_inverse'
WEIGHTINGS = (SIGMA_SQ, UNIT, SNR_INVERSE)

NOISED = 'noised'
CLEAN = 'clean'
DENOISED = 'denoised'
ENERGY_INPUTS = (NOISED, CLEAN, DENOISED)


@dataclass(frozen=True)
class DistillationSettings:
    schedule: NoiseSchedule = DEFAULT_SCHEDULE
    weighting: str = SIGMA_SQ
    energy_input: str = NOISED
    weight_scale: float = 1.0

    def __post_init__(self):
        if self.weighting not in WEIGHTINGS:
            raise ConfigError(f"Unknown weighting {self.weighting!r}; choose from {WEIGHTINGS}")
        if self.energy_input not in ENERGY_INPUTS:
            raise ConfigError(f"Unknown energy input {self.energy_input!r}; choose from {ENERGY_INPUTS}")

    def weight(self, t):
        """w(t): σ_t², 1, or σ_t/α_t, times weight_scale"""
        alpha, sigma = self.schedule.at(t)
        if self.weighting == SIGMA_SQ:
            value = sigma ** 2
        elif self.weighting == UNIT:
            value = 1.0
        else:
            value = sigma / alpha
        return self.weight_scale * value


DEFAULT_SETTINGS = DistillationSettings()
