"""
Seeded random streams.

Every random draw in the lab comes from a generator derived from
(run seed, step index, stream kind, index) through numpy's SeedSequence, so a
draw never depends on how many other draws happened before it.
"""
from dataclasses import dataclass

import numpy as np
import torch

from core.exceptions import ContractError

VIEW_STREAM = 0
AUX_STREAM = 1

# Auxiliary stream indices
CAMERA_STREAM = 0
TIMESTEP_STREAM = 1
ENERGY_STREAM = 2
BATCH_STREAM = 3


def derive_seed(seed, *keys):
    """Derive a 64-bit seed from a root seed and an integer key path"""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def seeded_generator(seed, *keys):
    generator = torch.Generator(device='cpu')
    generator.manual_seed(derive_seed(seed, *keys))
    return generator


def numpy_rng(seed, *keys):
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys)))


@dataclass
class ViewStream:
    """Draws for one view in one step; jitter first, then noise"""
    generator: torch.Generator
    zero_noise: bool = False

    def uniform(self, shape, dtype=torch.float32, device='cpu'):
        return torch.rand(tuple(shape), generator=self.generator, dtype=dtype).to(device)

    def normal(self, shape, dtype=torch.float32, device='cpu'):
        if self.zero_noise:
            return torch.zeros(tuple(shape), dtype=dtype, device=device)
        return torch.randn(tuple(shape), generator=self.generator, dtype=dtype).to(device)


class StepStreams:
    """Child streams for one optimisation step of one run"""

    zero_noise = False

    def __init__(self, seed, step):
        if int(seed) < 0 or int(step) < 0:
            raise ContractError('Seeds and step indices must be non-negative')
        self.seed = int(seed)
        self.step = int(step)

    def view(self, index):
        """A fresh stream for view `index`; repeated calls replay the same draws"""
        return ViewStream(seeded_generator(self.seed, self.step, VIEW_STREAM, index), self.zero_noise)

    def views(self, count):
        return [self.view(i) for i in range(count)]

    def aux(self, index):
        """A generator for step-level draws (cameras, timestep, energy)"""
        return seeded_generator(self.seed, self.step, AUX_STREAM, index)

    def __repr__(self):
        return f"{type(self).__name__}(seed={self.seed}, step={self.step})"


class ZeroNoiseStreams(StepStreams):
    """Streams whose injected diffusion noise is exactly zero"""

    zero_noise = True
