"""
SDS and JSD gradient estimators and the naive weighted-combination baseline.

All three share one recipe per view i: render x0_i = g(θ, c_i) from the view's
stream, draw ε_i from the same stream, form x_t_i = α x0_i + σ ε_i, build a
residual under stop-gradient and backpropagate
    Σ_i w(t) · residual_i · ∂x0_i/∂θ
through the surface only. Priors and energies never receive gradients.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import torch

from core.checkpoints import CheckpointService
from core.exceptions import ContractError, DomainError
from apps.diffusion.schedule import diffuse
from .exceptions import NoDistillationWeightException
from .weighting import CLEAN, DEFAULT_SETTINGS, DENOISED

logger = logging.getLogger(__name__)

REPORT_KIND = 'gradient_report'


@dataclass
class GradientReport:
    theta_grad: Dict[str, torch.Tensor]
    per_view_residuals: List[torch.Tensor]
    energy_value: Optional[float] = None
    metadata: dict = field(default_factory=dict)

    def __add__(self, other):
        names = set(self.theta_grad) | set(other.theta_grad)
        theta_grad = {}
        for name in names:
            if name in self.theta_grad and name in other.theta_grad:
                theta_grad[name] = self.theta_grad[name] + other.theta_grad[name]
            else:
                theta_grad[name] = self.theta_grad.get(name, other.theta_grad.get(name)).clone()
        if len(self.per_view_residuals) == len(other.per_view_residuals):
            residuals = [a + b for a, b in zip(self.per_view_residuals, other.per_view_residuals)]
        else:
            residuals = self.per_view_residuals + other.per_view_residuals
        values = [v for v in (self.energy_value, other.energy_value) if v is not None]
        return GradientReport(theta_grad, residuals, sum(values) if values else None,
                              {**self.metadata, **other.metadata})

    def scaled(self, factor):
        return GradientReport(
            {name: factor * grad for name, grad in self.theta_grad.items()},
            [factor * residual for residual in self.per_view_residuals],
            None if self.energy_value is None else factor * self.energy_value,
            dict(self.metadata),
        )

    @property
    def residual_norm(self):
        return float(torch.sqrt(sum((r.double() ** 2).sum() for r in self.per_view_residuals)))

    @property
    def loss(self):
        """Mean squared residual over views; the scalar tracked per step"""
        if not self.per_view_residuals:
            return 0.0
        return float(sum((r.double() ** 2).mean() for r in self.per_view_residuals) / len(self.per_view_residuals))

    def is_finite(self):
        return all(torch.isfinite(grad).all() for grad in self.theta_grad.values())

    def apply_to(self, surface):
        """Write theta_grad into the .grad fields of the surface parameters"""
        for name, parameter in surface.named_parameters():
            if name in self.theta_grad:
                parameter.grad = self.theta_grad[name].detach().clone().to(parameter)

    def save(self, path):
        state = {f"theta.{name}": grad for name, grad in self.theta_grad.items()}
        state.update({f"residual.{i}": residual for i, residual in enumerate(self.per_view_residuals)})
        metadata = {'energy_value': self.energy_value, 'views': len(self.per_view_residuals), **self.metadata}
        return CheckpointService.save(path, REPORT_KIND, state, metadata)

    @classmethod
    def load(cls, path):
        state, metadata = CheckpointService.load(path, REPORT_KIND)
        theta_grad = {name[len('theta.'):]: value for name, value in state.items() if name.startswith('theta.')}
        residuals = [state[f"residual.{i}"] for i in range(metadata.get('views', 0))]
        extra = {k: v for k, v in metadata.items() if k not in ('energy_value', 'views')}
        return cls(theta_grad, residuals, metadata.get('energy_value'), extra)


def _render(surface, cameras, indices, streams, t, schedule):
    """x0 [V, ...] with graph, ε [V, ...] and x_t [V, ...] without"""
    alpha, sigma = schedule.at(t)
    renders, noises = [], []
    for camera, index in zip(cameras, indices):
        stream = streams.view(index)
        x0 = surface.render_view(index, camera, stream)
        renders.append(x0)
        noises.append(stream.normal(x0.shape, dtype=x0.dtype, device=x0.device))
    x0 = torch.stack(renders)
    eps = torch.stack(noises)
    x_t = diffuse(x0.detach(), alpha, sigma, eps)
    return x0, eps, x_t


def _backprop(surface, x0, residual):
    parameters = [(name, p) for name, p in surface.named_parameters() if p.requires_grad]
    if not x0.requires_grad:
        return {name: torch.zeros_like(p) for name, p in parameters}
    grads = torch.autograd.grad(x0, [p for _, p in parameters], grad_outputs=residual.to(x0),
                                allow_unused=True)
    return {name: torch.zeros_like(p) if grad is None else grad for (name, p), grad in zip(parameters, grads)}


def _energy_inputs(settings, x0, x_t, eps_hat, t):
    if settings.energy_input == CLEAN:
        return x0.detach()
    if settings.energy_input == DENOISED:
        alpha, sigma = settings.schedule.at(t)
        return (x_t - sigma * eps_hat) / alpha
    return x_t


def _distil(surface, cameras, indices, t, label, scale, prior, streams, settings, energy=None):
    if not cameras:
        raise ContractError('At least one view is required')
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"Timestep {t} outside [0, 1]")

    x0, eps, x_t = _render(surface, cameras, indices, streams, t, settings.schedule)
    eps_hat = prior.guided_noise(x_t, t, label, cameras, scale, eps, streams.step).to(x_t)

    energy_value = None
    coherence = torch.zeros_like(x_t)
    if energy is not None:
        inputs = _energy_inputs(settings, x0, x_t, eps_hat, t)
        result = energy.evaluate(inputs.detach(), cameras, t, streams.step)
        energy_value = result.value
        coherence = result.grads.to(x_t)

    weight = settings.weight(t)
    with torch.no_grad():
        residual = weight * (eps_hat - coherence - eps)

    theta_grad = _backprop(surface, x0, residual)
    return GradientReport(theta_grad, list(residual.unbind(0)), energy_value, {'t': float(t), 'weight': weight})


def sds_grad(surface, camera, t, label, scale, prior, streams, settings=DEFAULT_SETTINGS, view_index=0):
    """
    Single-view score distillation: w(t)·(ε̂(x_t, t, y) − ε)·∂g/∂θ.

    `view_index` selects the view stream, so SDS on view i replays exactly
    the draws JSD uses for its i-th view.
    """
    return _distil(surface, [camera], [view_index], t, label, scale, prior, streams, settings)


def summed_sds_grad(surface, cameras, t, label, scale, prior, streams, settings=DEFAULT_SETTINGS):
    """Per-view SDS summed over the views; residuals stay per view"""
    if not cameras:
        raise ContractError('At least one view is required')
    views = [sds_grad(surface, camera, t, label, scale, prior, streams, settings, view_index=index)
             for index, camera in enumerate(cameras)]
    theta_grad = {name: sum(view.theta_grad[name] for view in views) for name in views[0].theta_grad}
    residuals = [residual for view in views for residual in view.per_view_residuals]
    return GradientReport(theta_grad, residuals, None, dict(views[0].metadata))


def jsd_grad(surface, cameras, t, label, scale, prior, energy, streams, settings=DEFAULT_SETTINGS):
    """
    Joint score distillation over V views at a shared t:
        Σ_i w(t)·(ε̂(x_t_i, y) − ∂C(x̃)/∂x_t_i − ε_i)·∂g(θ, c_i)/∂θ
    The energy reads the noised views unless settings choose clean renders
    or one-step denoised estimates.
    """
    return _distil(surface, cameras, list(range(len(cameras))), t, label, scale, prior, streams, settings,
                   energy=energy)


def combined_baseline_grad(surface, cameras, t, label, scale, prior, view_prior, lambda_sds, lambda_view,
                           streams, settings=DEFAULT_SETTINGS):
    """
    λ_sds · Σ_i SDS_i(2D prior) + λ_view · SDS-style residual of the
    multi-view surrogate; no coherence term. A term with zero weight is
    never evaluated.
    """
    if lambda_sds < 0 or lambda_view < 0:
        raise DomainError('Baseline weights must be non-negative')
    if lambda_sds == 0 and lambda_view == 0:
        raise NoDistillationWeightException()

    report = None
    if lambda_sds > 0:
        report = summed_sds_grad(surface, cameras, t, label, scale, prior, streams, settings).scaled(lambda_sds)
    if lambda_view > 0:
        view = _distil(surface, cameras, list(range(len(cameras))), t, label, scale, view_prior, streams,
                       settings).scaled(lambda_view)
        report = view if report is None else report + view
    return report
