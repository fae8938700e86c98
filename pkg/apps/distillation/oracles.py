"""
Numerical checks for the estimators in low-dimensional Gaussian settings.

kl_gradient_oracle integrates the (multi-view) KL between the diffused
Gaussian q_t^θ and the energy-tilted product target

    p̃_t(x̃) ∝ exp(C(x̃)/σ_t) · Π_i p_t(x_i)

by adaptive quadrature and differentiates it by central differences. With
that target the Monte-Carlo mean of jsd_grad equals w(t)·σ_t/α_t times the
oracle gradient; expected_estimator_mean applies the factor.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from core.exceptions import ContractError, DomainError
from core.rng import numpy_rng
from apps.diffusion.schedule import DEFAULT_SCHEDULE, NoiseSchedule
from .exceptions import OracleDimensionException
from .weighting import DEFAULT_SETTINGS

logger = logging.getLogger(__name__)

MIN_B_TERM_SAMPLES = 1000
MAX_INTEGRATION_DIMS = 2
SPAN = 12.0
STEP = 1e-3

_B_TERM_KEY = 5


def validate_b_term(mu, sdev, n_samples, seed=0):
    """
    Monte-Carlo estimate of E_{x~N(μ, s²)}[∂/∂(μ, s) log q(x)].

    Returns:
        (estimate, standard_error), both arrays of length 2 ordered (μ, s)
    """
    if sdev <= 0:
        raise DomainError(f"Standard deviation must be positive, got {sdev}")
    if n_samples < MIN_B_TERM_SAMPLES:
        raise ContractError(f"At least {MIN_B_TERM_SAMPLES} samples are required, got {n_samples}")

    x = numpy_rng(seed, _B_TERM_KEY).normal(mu, sdev, size=int(n_samples))
    centred = x - mu
    scores = np.stack([centred / sdev ** 2, -1.0 / sdev + centred ** 2 / sdev ** 3])
    estimate = scores.mean(axis=1)
    standard_error = scores.std(axis=1, ddof=1) / math.sqrt(n_samples)
    return estimate, standard_error


@dataclass(frozen=True)
class GaussianSetup:
    """
    theta: (V, d) view means of q_θ = N(θ_i, s_q² I)
    means / variances / weights: isotropic Gaussian mixture p, K components
    kappa: quadratic coupling strength, 0 for no energy
    """
    theta: Tuple
    s_q: float
    means: Tuple
    variances: Tuple
    t: float
    kappa: float = 0.0
    weights: Optional[Tuple] = None
    schedule: NoiseSchedule = DEFAULT_SCHEDULE

    def theta_array(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        return theta.reshape(1, -1) if theta.ndim == 1 else theta

    def mixture(self):
        variances = np.asarray(self.variances, dtype=np.float64).reshape(-1)
        means = np.asarray(self.means, dtype=np.float64).reshape(len(variances), -1)
        weights = np.ones(len(variances)) if self.weights is None else np.asarray(self.weights, dtype=np.float64)
        return means, variances, weights / weights.sum()


def _log_prior_t(x, means, variances, weights, alpha, sigma):
    """log p_t(x) for one view x of shape (d,)"""
    spread = alpha ** 2 * variances + sigma ** 2
    d = x.shape[-1]
    sq = ((x[None, :] - alpha * means) ** 2).sum(axis=-1)
    return logsumexp(np.log(weights) - 0.5 * d * np.log(2 * np.pi * spread) - 0.5 * sq / spread)


def _coupling(x, kappa):
    """C(x̃) = −κ Σ ‖x_i − x_j‖² over ring neighbours; two views give one pair"""
    views = x.shape[0]
    if views < 2 or kappa == 0:
        return 0.0
    if views == 2:
        return -kappa * float(((x[0] - x[1]) ** 2).sum())
    return -kappa * sum(float(((x[i] - x[(i + 1) % views]) ** 2).sum()) for i in range(views))


def _kl(setup, theta):
    """KL(q_t^θ ‖ p̃_t) up to the θ-independent log-normaliser of p̃_t"""
    alpha, sigma = setup.schedule.at(setup.t)
    means, variances, weights = setup.mixture()
    views, d = theta.shape
    q_var = alpha ** 2 * setup.s_q ** 2 + sigma ** 2
    q_sd = math.sqrt(q_var)
    if setup.kappa and sigma <= 0:
        raise DomainError('A coupling energy needs t > 0')

    centre = (alpha * theta).reshape(-1)
    n = centre.size
    neg_entropy = -0.5 * n * math.log(2 * math.pi * math.e * q_var)

    def cross(*coords):
        x = np.asarray(coords, dtype=np.float64)
        log_q = -0.5 * n * math.log(2 * math.pi * q_var) - 0.5 * float(((x - centre) ** 2).sum()) / q_var
        views_x = x.reshape(views, d)
        log_target = sum(_log_prior_t(views_x[i], means, variances, weights, alpha, sigma) for i in range(views))
        if setup.kappa:
            log_target += _coupling(views_x, setup.kappa) / sigma
        return math.exp(log_q) * log_target

    bounds = [(c - SPAN * q_sd, c + SPAN * q_sd) for c in centre]
    if n == 1:
        value, _ = integrate.quad(cross, *bounds[0], epsabs=1e-12, epsrel=1e-11, limit=200)
    else:
        (x_low, x_high), (y_low, y_high) = bounds
        # dblquad integrates func(y, x) with y the inner variable
        value, _ = integrate.dblquad(lambda y, x: cross(x, y), x_low, x_high, y_low, y_high,
                                     epsabs=1e-11, epsrel=1e-10)
    return neg_entropy - value


def kl_gradient_oracle(setup, h=STEP):
    """
    Central-difference gradient of the KL with respect to θ.

    Returns:
        Array shaped like setup.theta_array()
    """
    theta = setup.theta_array()
    if theta.size > MAX_INTEGRATION_DIMS:
        raise OracleDimensionException(
            f"{theta.shape[0]} views of dimension {theta.shape[1]} exceed {MAX_INTEGRATION_DIMS} integration dims"
        )
    if setup.s_q <= 0:
        raise DomainError('s_q must be positive')

    gradient = np.zeros_like(theta)
    for index in np.ndindex(theta.shape):
        plus, minus = theta.copy(), theta.copy()
        plus[index] += h
        minus[index] -= h
        gradient[index] = (_kl(setup, plus) - _kl(setup, minus)) / (2 * h)
    logger.debug(f"KL gradient at theta={theta.tolist()}: {gradient.tolist()}")
    return gradient


def expected_estimator_mean(setup, settings=DEFAULT_SETTINGS):
    """Per-draw mean of the distillation gradient the oracle predicts: w(t)·σ/α·∇KL"""
    alpha, sigma = setup.schedule.at(setup.t)
    return settings.weight(setup.t) * sigma / alpha * kl_gradient_oracle(setup)
