"""
Concrete energies and the name registry used by run configs.
"""
import logging

import torch

from core.exceptions import DomainError
from core.rng import ENERGY_STREAM, seeded_generator
from .base import EnergyFunction, ring_pairs
from .exceptions import UnknownEnergyException
from .networks import relative_poses, resize_views
from .services import ClassifierService, SynthService, TranslatorService

logger = logging.getLogger(__name__)


class ZeroEnergy(EnergyFunction):
    """C ≡ 0; JSD with this energy is per-view SDS"""

    name = 'zero'

    def compute(self, views, cameras, t, step):
        return 0.0, torch.zeros_like(views)

    def energy(self, views, cameras, t, step):
        return views.sum() * 0.0


class QuadraticEnergy(EnergyFunction):
    """C = −κ Σ ‖x_i − x_j‖² over neighbouring ring pairs, with closed-form gradients"""

    name = 'quadratic'

    def __init__(self, kappa=0.5, weight=1.0):
        super().__init__(weight)
        if kappa <= 0:
            raise DomainError(f"kappa must be positive, got {kappa}")
        self.kappa = float(kappa)

    def compute(self, views, cameras, t, step):
        value = 0.0
        grads = torch.zeros_like(views)
        for i, j in ring_pairs(cameras):
            diff = views[i] - views[j]
            value -= self.kappa * (diff ** 2).sum().item()
            grads[i] -= 2.0 * self.kappa * diff
            grads[j] += 2.0 * self.kappa * diff
        return value, grads

    def energy(self, views, cameras, t, step):
        total = views.sum() * 0.0
        for i, j in ring_pairs(cameras):
            total = total - self.kappa * ((views[i] - views[j]) ** 2).sum()
        return total


class ClsEnergy(EnergyFunction):
    """C_CLS = Σ M_CLS(x_i, x_j, Δ(c_j, c_i)) over ordered ring neighbours"""

    name = 'cls'

    def __init__(self, classifier, weight=1.0):
        super().__init__(weight)
        self.classifier = classifier.eval()
        for parameter in self.classifier.parameters():
            parameter.requires_grad_(False)

    def energy(self, views, cameras, t, step):
        pairs = ring_pairs(cameras, ordered=True)
        if not pairs:
            return views.sum() * 0.0
        first = torch.stack([views[i] for i, _ in pairs])
        second = torch.stack([views[j] for _, j in pairs])
        poses = relative_poses([cameras[j] for _, j in pairs], [cameras[i] for i, _ in pairs]).to(views)
        return self.classifier(first, second, poses).sum()


class RandomReference:
    """A uniformly random reference view, redrawn every step"""

    def __init__(self, seed=0):
        self.seed = seed

    def __call__(self, count, step):
        generator = seeded_generator(self.seed, step, ENERGY_STREAM)
        return int(torch.randint(count, (1,), generator=generator).item())


class FixedReference:
    def __init__(self, index=0):
        self.index = index

    def __call__(self, count, step):
        return self.index % count


class IdentityTranslator(torch.nn.Module):
    """Copies the reference view regardless of the pose"""

    def forward(self, source, pose):
        return source


class I2IEnergy(EnergyFunction):
    """
    C_I2I = −Σ_i ‖M_I2I(x_ref, Δ(c_i, c_ref)) − x_i‖² over every non-reference view.

    Gradients reach the targets directly and the reference through the
    translator.
    """

    name = 'i2i'
    min_views = 2

    def __init__(self, translator, reference=None, weight=1.0):
        super().__init__(weight)
        self.translator = translator.eval()
        for parameter in self.translator.parameters():
            parameter.requires_grad_(False)
        self.reference = reference or RandomReference()

    def energy(self, views, cameras, t, step):
        ref = self.reference(len(cameras), step)
        targets = [i for i in range(len(cameras)) if i != ref]
        source = views[ref].unsqueeze(0).expand(len(targets), *views.shape[1:])
        poses = relative_poses([cameras[i] for i in targets], [cameras[ref]] * len(targets)).to(views)
        predicted = self.translator(source, poses)
        return -((predicted - views[targets]) ** 2).sum()


class MvsEnergy(EnergyFunction):
    """
    C_MVS = −‖M_MVS(y, c̃) − x̃‖².

    The generated views are redrawn every step from a step-derived seed and
    are constants, so the gradient is 2·(M_MVS(y, c̃) − x̃).
    """

    name = 'mvs'

    def __init__(self, synth, label, seed=0, weight=1.0):
        super().__init__(weight)
        self.synth = synth.eval()
        self.label = label
        self.seed = seed

    def targets(self, cameras, step):
        outside = [camera for camera in cameras if not self.synth.in_range(camera)]
        if outside:
            logger.warning(f"{len(outside)} of {len(cameras)} poses lie outside the synthesis model's "
                           f"camera range {self.synth.camera_ranges}")
        generator = seeded_generator(self.seed, step, ENERGY_STREAM)
        return SynthService.generate(self.synth, self.label, cameras, generator)

    def compute(self, views, cameras, t, step):
        target = resize_views(self.targets(cameras, step), views.shape[-1]).to(views)
        diff = target - views
        return -(diff ** 2).sum().item(), 2.0 * diff

    def energy(self, views, cameras, t, step):
        target = resize_views(self.targets(cameras, step), views.shape[-1]).to(views)
        return -((target - views) ** 2).sum()


class RandomDisturbanceEnergy(EnergyFunction):
    """Ablation: replaces the coherence gradient with U(0, 1) noise"""

    name = 'random'

    def __init__(self, seed=0, weight=1.0):
        super().__init__(weight)
        self.seed = seed

    def compute(self, views, cameras, t, step):
        generator = seeded_generator(self.seed, step, ENERGY_STREAM)
        grads = torch.rand(views.shape, generator=generator, dtype=views.dtype).to(views.device)
        return 0.0, grads

    def energy(self, views, cameras, t, step):
        return views.sum() * 0.0


ENERGIES = {
    ZeroEnergy.name: ZeroEnergy,
    QuadraticEnergy.name: QuadraticEnergy,
    ClsEnergy.name: ClsEnergy,
    I2IEnergy.name: I2IEnergy,
    MvsEnergy.name: MvsEnergy,
    RandomDisturbanceEnergy.name: RandomDisturbanceEnergy,
}


def build_energy(name, weight=1.0, kappa=0.5, checkpoint=None, label=None, reference=None, seed=0):
    """
    Build an energy by registry name. Learned energies load their model
    from `checkpoint`; `reference` is 'random' or a fixed view index.
    """
    if name not in ENERGIES:
        raise UnknownEnergyException(f"Unknown energy {name!r}; choose from {sorted(ENERGIES)}")
    if name == 'zero':
        return ZeroEnergy(weight)
    if name == 'quadratic':
        return QuadraticEnergy(kappa, weight)
    if name == 'random':
        return RandomDisturbanceEnergy(seed, weight)
    if name == 'cls':
        return ClsEnergy(ClassifierService.load(checkpoint), weight)
    if name == 'i2i':
        selector = RandomReference(seed) if reference in (None, 'random') else FixedReference(int(reference))
        return I2IEnergy(TranslatorService.load(checkpoint), selector, weight)
    return MvsEnergy(SynthService.load(checkpoint), label, seed, weight)
