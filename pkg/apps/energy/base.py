"""
Energy interface.

An energy C(x̃, c̃) scores the coherence of V views taken from poses c̃ and
reports its gradient with respect to every view. Views arrive stacked as one
tensor [V, ...]; the returned gradients have exactly that shape.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass

import torch

from .exceptions import EnergyArityException


@dataclass
class EnergyResult:
    value: float
    grads: torch.Tensor

    def per_view(self):
        return list(self.grads.unbind(0))

    def scaled(self, weight):
        if weight == 1.0:
            return self
        return EnergyResult(weight * self.value, weight * self.grads)


def ring_order(cameras):
    """View indices sorted by azimuth"""
    return sorted(range(len(cameras)), key=lambda i: (cameras[i].azimuth, i))


def ring_pairs(cameras, ordered=False):
    """
    Neighbouring views on the azimuth ring, wrapping around.

    Unordered pairs appear once. With ordered=True each view is paired with
    its successor, so two views give both directions.
    """
    order = ring_order(cameras)
    count = len(order)
    if count < 2:
        return []
    if count == 2 and not ordered:
        return [(order[0], order[1])]
    return [(order[k], order[(k + 1) % count]) for k in range(count)]


class EnergyFunction(ABC):
    """
    Base class for inter-view energies.

    Subclasses implement `energy()` returning a differentiable scalar, or
    override `compute()` when the gradient has a closed form. `weight`
    scales both the value and the gradients.
    """

    name = None
    min_views = 1

    def __init__(self, weight=1.0):
        self.weight = float(weight)

    def evaluate(self, views, cameras, t, step=0):
        """
        Args:
            views: Stacked views [V, ...]
            cameras: V cameras
            t: Diffusion time of the views
            step: Optimisation step, seeds any internal randomness

        Returns:
            EnergyResult with grads shaped like `views`
        """
        if views.shape[0] != len(cameras):
            raise EnergyArityException(f"{views.shape[0]} views but {len(cameras)} cameras")
        if len(cameras) < self.min_views:
            raise EnergyArityException(
                f"The {self.name} energy needs at least {self.min_views} views, got {len(cameras)}"
            )
        value, grads = self.compute(views.detach(), cameras, t, step)
        return EnergyResult(float(value), grads.detach()).scaled(self.weight)

    def compute(self, views, cameras, t, step):
        with torch.enable_grad():
            x = views.clone().requires_grad_(True)
            value = self.energy(x, cameras, t, step)
            if not value.requires_grad:
                return value.item(), torch.zeros_like(views)
            (grads,) = torch.autograd.grad(value, x)
        return value.item(), grads

    @abstractmethod
    def energy(self, views, cameras, t, step):
        """Scalar tensor C(views, cameras)"""

    def __repr__(self):
        return f"{type(self).__name__}(weight={self.weight})"
