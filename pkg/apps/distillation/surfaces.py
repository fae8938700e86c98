"""
Differentiable generators g(θ, c) the estimators backpropagate through.

A surface renders view `index` for `camera` drawing any randomness from the
view's stream, and exposes its learnable parameters by name.
"""
import torch
import torch.nn as nn

from core.exceptions import ContractError, DomainError
from apps.energy.networks import resize_views
from apps.scene.rendering import RenderOptions, render


class VoxelSurface:
    """
    A voxel scene rendered by the ray marcher, resized to the prior's
    resolution and mapped to model space 2·rgb − 1.
    """

    def __init__(self, scene, options=None, model_resolution=None):
        self.scene = scene
        self.options = options or RenderOptions(training=True)
        self.model_resolution = model_resolution

    def named_parameters(self):
        return self.scene.named_parameters()

    def with_options(self, options):
        return VoxelSurface(self.scene, options, self.model_resolution)

    def render_view(self, index, camera, stream=None):
        rgb = render(self.scene, camera, self.options, stream).rgb
        if self.model_resolution:
            rgb = resize_views(rgb.unsqueeze(0), self.model_resolution)[0]
        return 2.0 * rgb - 1.0


class IdentityScene(nn.Module):
    """θ is the stack of views itself: g(θ, c_i) = θ_i"""

    def __init__(self, theta):
        super().__init__()
        self.theta = nn.Parameter(torch.as_tensor(theta, dtype=torch.float64).clone())

    def render_view(self, index, camera=None, stream=None):
        if not 0 <= index < self.theta.shape[0]:
            raise ContractError(f"View {index} outside the {self.theta.shape[0]} held views")
        return self.theta[index]


class GaussianScene(nn.Module):
    """
    Reparameterised Gaussian q_θ = N(θ_i, s_q² I) per view, drawn `draws`
    times at once: g(θ, c_i) = θ_i + s_q·z with z ~ N(0, I) of shape
    (draws, d). The draws come from the view stream before the diffusion
    noise.
    """

    def __init__(self, theta, s_q=0.3, draws=1):
        super().__init__()
        if s_q <= 0:
            raise DomainError(f"s_q must be positive, got {s_q}")
        if draws < 1:
            raise ContractError('At least one draw is required')
        theta = torch.as_tensor(theta, dtype=torch.float64)
        if theta.dim() != 2:
            raise ContractError(f"theta must be shaped (V, d), got {tuple(theta.shape)}")
        self.theta = nn.Parameter(theta.clone())
        self.s_q = float(s_q)
        self.draws = int(draws)

    def render_view(self, index, camera=None, stream=None):
        if stream is None:
            raise ContractError('GaussianScene needs a view stream')
        z = torch.randn((self.draws, self.theta.shape[1]), generator=stream.generator, dtype=self.theta.dtype)
        return self.theta[index] + self.s_q * z
