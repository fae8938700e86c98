"""
Noise predictors the estimators distil from.

Every prior answers guided_noise(x_t, t, label, cameras, scale, eps, step)
for a stack of V noised views and returns V predictions shaped like x_t.
`eps` is the injected noise; only the oracle reads it.
"""
import logging

import torch

from core.exceptions import ContractError, DomainError
from core.rng import ENERGY_STREAM, seeded_generator
from apps.diffusion.schedule import DEFAULT_SCHEDULE
from apps.diffusion.services import DenoiserService
from apps.energy.networks import resize_views
from apps.energy.services import SynthService
from .exceptions import UntrainedPriorException

logger = logging.getLogger(__name__)


class Prior:
    """Base class; subclasses implement guided_noise"""

    name = None

    def guided_noise(self, x_t, t, label, cameras, scale, eps, step=0):
        raise NotImplementedError

    def describe(self):
        return {'name': self.name}


class DenoiserPrior(Prior):
    """The trained toy denoiser with classifier-free guidance and view-bucket conditioning"""

    name = 'denoiser'

    def __init__(self, model, schedule=DEFAULT_SCHEDULE, allow_untrained=False, view_conditioning=True):
        if not getattr(model, 'trained', False):
            if not allow_untrained:
                raise UntrainedPriorException()
            logger.warning('Distilling from an untrained denoiser')
        self.model = model
        self.schedule = schedule
        self.view_conditioning = view_conditioning
        for parameter in self.model.parameters():
            parameter.requires_grad_(False)

    @property
    def image_size(self):
        return self.model.image_size

    def guided_noise(self, x_t, t, label, cameras, scale, eps, step=0):
        if x_t.shape[0] != len(cameras):
            raise ContractError(f"{x_t.shape[0]} views but {len(cameras)} cameras")
        views = [camera.bucket for camera in cameras] if self.view_conditioning else None
        return DenoiserService.guided_noise(self.model, x_t, t, label, views, scale)

    def describe(self):
        return {'name': self.name, 'labels': list(self.model.labels), 'image_size': self.model.image_size}


class InjectedNoiseOracle(Prior):
    """ε̂ ≡ ε; every SDS residual vanishes"""

    name = 'oracle'

    def guided_noise(self, x_t, t, label, cameras, scale, eps, step=0):
        return eps.detach().clone()


class ConstantPrior(Prior):
    name = 'constant'

    def __init__(self, value=0.0):
        self.value = float(value)

    def guided_noise(self, x_t, t, label, cameras, scale, eps, step=0):
        return torch.full_like(x_t, self.value)


class GaussianMixturePrior(Prior):
    """
    Exact noise prediction for an isotropic Gaussian mixture p = Σ_k π_k N(μ_k, v_k I).

    The diffused marginal is p_t = Σ_k π_k N(α μ_k, (α² v_k + σ²) I), so
    ε̂ = −σ ∇log p_t = σ Σ_k r_k (x − α μ_k) / (α² v_k + σ²)
    with r_k the component responsibilities. The last axis of x_t is the
    data dimension; labels and guidance are ignored.
    """

    name = 'gaussian'

    def __init__(self, means, variances, weights=None, schedule=DEFAULT_SCHEDULE):
        self.means = torch.as_tensor(means, dtype=torch.float64).reshape(len(variances), -1)
        self.variances = torch.as_tensor(variances, dtype=torch.float64).reshape(-1)
        if (self.variances <= 0).any():
            raise DomainError('Mixture variances must be positive')
        count = self.variances.numel()
        weights = torch.full((count,), 1.0 / count, dtype=torch.float64) if weights is None else \
            torch.as_tensor(weights, dtype=torch.float64).reshape(-1)
        if weights.numel() != count or (weights <= 0).any():
            raise DomainError('Mixture weights must be positive, one per component')
        self.weights = weights / weights.sum()
        self.schedule = schedule

    @property
    def dimension(self):
        return self.means.shape[1]

    def guided_noise(self, x_t, t, label, cameras, scale, eps, step=0):
        if x_t.shape[-1] != self.dimension:
            raise ContractError(f"Mixture of dimension {self.dimension} applied to data of size {x_t.shape[-1]}")
        alpha, sigma = self.schedule.at(t)
        x = x_t.detach().to(torch.float64).unsqueeze(-2)          # [..., 1, d]
        centred = x - alpha * self.means                            # [..., K, d]
        spread = alpha ** 2 * self.variances + sigma ** 2           # [K]
        log_resp = (torch.log(self.weights)
                    - 0.5 * self.dimension * torch.log(spread)
                    - 0.5 * (centred ** 2).sum(dim=-1) / spread)
        resp = torch.softmax(log_resp, dim=-1)
        eps_hat = sigma * (resp.unsqueeze(-1) * centred / spread.unsqueeze(-1)).sum(dim=-2)
        return eps_hat.to(x_t.dtype)

    def describe(self):
        return {'name': self.name, 'means': self.means.tolist(), 'variances': self.variances.tolist(),
                'weights': self.weights.tolist()}


class MultiViewSurrogatePrior(Prior):
    """
    The multi-view synthesis model used directly as a denoiser: it proposes
    clean views x̂0 for the cameras and ε̂ = (x_t − α x̂0) / σ. Proposals are
    redrawn per step from a step-derived seed.
    """

    name = 'mvs'

    def __init__(self, synth, seed=0, schedule=DEFAULT_SCHEDULE):
        self.synth = synth
        self.seed = seed
        self.schedule = schedule

    def proposals(self, label, cameras, step, size):
        generator = seeded_generator(self.seed, step, ENERGY_STREAM)
        return resize_views(SynthService.generate(self.synth, label, cameras, generator), size)

    def guided_noise(self, x_t, t, label, cameras, scale, eps, step=0):
        alpha, sigma = self.schedule.at(t)
        if sigma <= 0:
            raise DomainError('The synthesis surrogate needs t > 0')
        clean = self.proposals(label, cameras, step, x_t.shape[-1]).to(x_t)
        return (x_t.detach() - alpha * clean) / sigma


PRIORS = {
    DenoiserPrior.name: DenoiserPrior,
    InjectedNoiseOracle.name: InjectedNoiseOracle,
    ConstantPrior.name: ConstantPrior,
}


def build_prior(name, checkpoint=None, allow_untrained=False, value=0.0, view_conditioning=True):
    """
    Build an image-space prior by name. Returns (prior, schedule); the
    denoiser brings the schedule it was trained with.
    """
    if name not in PRIORS:
        raise ContractError(f"Unknown prior {name!r}; choose from {sorted(PRIORS)}")
    if name == 'oracle':
        return InjectedNoiseOracle(), DEFAULT_SCHEDULE
    if name == 'constant':
        return ConstantPrior(value), DEFAULT_SCHEDULE
    model, schedule = DenoiserService.load(checkpoint)
    return DenoiserPrior(model, schedule, allow_untrained, view_conditioning), schedule
