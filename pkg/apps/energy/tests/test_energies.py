import logging

import numpy as np
import pytest
import torch

from core.exceptions import ContractError, DomainError
from apps.scene.cameras import Camera
from apps.energy.base import ring_order, ring_pairs
from apps.energy.energies import (
    ClsEnergy,
    FixedReference,
    I2IEnergy,
    IdentityTranslator,
    MvsEnergy,
    QuadraticEnergy,
    RandomDisturbanceEnergy,
    RandomReference,
    ZeroEnergy,
    build_energy,
)
from apps.energy.exceptions import EnergyArityException, UnknownEnergyException
from apps.energy.services import SynthService
from .factories import MultiViewSynthFactory, PairClassifierFactory, ViewTranslatorFactory


def orbit(count, offset=10.0, elevation=15.0):
    return [Camera(offset + i * 360.0 / count, elevation, 3.0) for i in range(count)]


def random_views(count, size=8, seed=0):
    generator = torch.Generator().manual_seed(seed)
    return torch.rand((count, 3, size, size), generator=generator, dtype=torch.float64) * 2 - 1


def random_classifier():
    classifier = PairClassifierFactory().double()
    torch.manual_seed(0)
    torch.nn.init.normal_(classifier.head[-1].weight, std=0.5)
    return classifier


def finite_difference(energy, views, cameras, pixels, step=1e-3, t=0.5, train_step=0):
    values = []
    for index in pixels:
        plus, minus = views.clone(), views.clone()
        plus[index] += step
        minus[index] -= step
        upper = energy.evaluate(plus, cameras, t, train_step).value
        lower = energy.evaluate(minus, cameras, t, train_step).value
        values.append((upper - lower) / (2 * step))
    return np.array(values)


PIXELS = [(0, 0, 1, 2), (1, 2, 3, 3), (2, 1, 5, 0), (3, 0, 7, 7)]


class TestRing:
    def test_order_by_azimuth(self):
        cameras = [Camera(200.0, 0.0, 3.0), Camera(10.0, 0.0, 3.0), Camera(100.0, 0.0, 3.0)]
        assert ring_order(cameras) == [1, 2, 0]
        assert ring_pairs(cameras) == [(1, 2), (2, 0), (0, 1)]

    def test_small_rings(self):
        assert ring_pairs(orbit(1)) == []
        assert ring_pairs(orbit(2)) == [(0, 1)]
        assert ring_pairs(orbit(2), ordered=True) == [(0, 1), (1, 0)]


class TestQuadraticEnergy:
    def test_identical_views(self):
        views = random_views(1).expand(3, -1, -1, -1).clone()
        result = QuadraticEnergy(0.5).evaluate(views, orbit(3), 0.5)
        assert result.value == 0.0
        assert torch.equal(result.grads, torch.zeros_like(views))

    def test_scalar_pair(self):
        views = torch.tensor([[1.0], [0.0]], dtype=torch.float64)
        result = QuadraticEnergy(0.5).evaluate(views, orbit(2), 0.5)
        assert result.value == pytest.approx(-0.5)
        assert result.grads[0].item() == pytest.approx(-1.0)
        assert result.grads[1].item() == pytest.approx(1.0)

    def test_finite_differences(self):
        views = random_views(4)
        energy = QuadraticEnergy(0.3)
        analytic = energy.evaluate(views, orbit(4), 0.5).grads
        numeric = finite_difference(energy, views, orbit(4), PIXELS)
        np.testing.assert_allclose([analytic[p].item() for p in PIXELS], numeric, rtol=1e-6)

    def test_matches_autograd(self):
        views = random_views(5)
        energy = QuadraticEnergy(0.7)
        closed = energy.evaluate(views, orbit(5), 0.5)
        automatic = super(QuadraticEnergy, energy).compute(views, orbit(5), 0.5, 0)
        assert closed.value == pytest.approx(automatic[0])
        assert torch.allclose(closed.grads, automatic[1], atol=1e-12)

    def test_weight_scales_value_and_grads(self):
        views = random_views(3)
        base = QuadraticEnergy(0.5).evaluate(views, orbit(3), 0.5)
        scaled = QuadraticEnergy(0.5, weight=2.0).evaluate(views, orbit(3), 0.5)
        assert scaled.value == pytest.approx(2.0 * base.value)
        assert torch.allclose(scaled.grads, 2.0 * base.grads)

    def test_kappa_domain(self):
        with pytest.raises(DomainError):
            QuadraticEnergy(0.0)


class TestArity:
    def test_mismatch(self):
        with pytest.raises(EnergyArityException):
            ZeroEnergy().evaluate(random_views(3), orbit(2), 0.5)

    def test_arity_is_contract_error(self):
        with pytest.raises(ContractError):
            QuadraticEnergy().evaluate(random_views(2), orbit(4), 0.5)

    @pytest.mark.parametrize('count', range(1, 9))
    def test_gradient_shapes(self, count):
        views = random_views(count)
        cameras = orbit(count)
        energies = [ZeroEnergy(), QuadraticEnergy(), RandomDisturbanceEnergy(), ClsEnergy(random_classifier())]
        if count >= 2:
            energies.append(I2IEnergy(ViewTranslatorFactory().double()))
        for energy in energies:
            grads = energy.evaluate(views, cameras, 0.5).grads
            assert grads.shape == views.shape
            for i in range(count):
                assert grads[i].shape == views[i].shape


class TestClsEnergy:
    def test_single_view(self):
        result = ClsEnergy(random_classifier()).evaluate(random_views(1), orbit(1), 0.5)
        assert result.value == 0.0
        assert torch.equal(result.grads, torch.zeros_like(result.grads))

    def test_model_resolution_shapes(self):
        views = random_views(4, size=32)
        result = ClsEnergy(random_classifier()).evaluate(views, orbit(4), 0.5)
        assert isinstance(result.value, float)
        assert [g.shape for g in result.per_view()] == [(3, 32, 32)] * 4

    def test_finite_differences(self):
        views = random_views(4)
        energy = ClsEnergy(random_classifier())
        analytic = energy.evaluate(views, orbit(4), 0.5).grads
        numeric = finite_difference(energy, views, orbit(4), PIXELS)
        np.testing.assert_allclose([analytic[p].item() for p in PIXELS], numeric, rtol=1e-2, atol=1e-8)

    def test_ring_rotation_covariance(self):
        views = random_views(4)
        cameras = orbit(4)
        energy = ClsEnergy(random_classifier())
        base = energy.evaluate(views, cameras, 0.5)
        roll = [1, 2, 3, 0]
        rolled = energy.evaluate(views[roll], [cameras[i] for i in roll], 0.5)
        assert rolled.value == pytest.approx(base.value, rel=1e-9)
        assert torch.allclose(rolled.grads, base.grads[roll], atol=1e-10)

    def test_untrained_classifier_is_flat(self):
        result = ClsEnergy(PairClassifierFactory()).evaluate(random_views(3).float(), orbit(3), 0.5)
        assert result.value == 0.0


class TestI2IEnergy:
    def test_identical_views_are_optimal(self):
        views = random_views(1).expand(4, -1, -1, -1).clone()
        result = I2IEnergy(IdentityTranslator()).evaluate(views, orbit(4), 0.5)
        assert result.value == 0.0

    def test_perturbed_target(self):
        views = random_views(1).expand(3, -1, -1, -1).clone()
        views[1] += 0.05
        result = I2IEnergy(IdentityTranslator(), FixedReference(0)).evaluate(views, orbit(3), 0.5)
        assert result.value == pytest.approx(-views[1].numel() * 0.05 ** 2)

    def test_gradients_reach_reference(self):
        views = random_views(3)
        result = I2IEnergy(IdentityTranslator(), FixedReference(0)).evaluate(views, orbit(3), 0.5)
        assert result.grads[0].abs().sum().item() > 0.0

    def test_single_view(self):
        with pytest.raises(EnergyArityException):
            I2IEnergy(IdentityTranslator()).evaluate(random_views(1), orbit(1), 0.5)

    def test_random_reference_is_per_step(self):
        selector = RandomReference(seed=3)
        assert selector(4, 7) == selector(4, 7)
        assert len({selector(4, step) for step in range(20)}) > 1

    def test_finite_differences(self):
        views = random_views(4)
        energy = I2IEnergy(ViewTranslatorFactory().double(), RandomReference(1))
        analytic = energy.evaluate(views, orbit(4), 0.5, 5).grads
        numeric = finite_difference(energy, views, orbit(4), PIXELS, train_step=5)
        np.testing.assert_allclose([analytic[p].item() for p in PIXELS], numeric, rtol=1e-2, atol=1e-8)


class TestMvsEnergy:
    def test_generated_views_are_optimal(self):
        synth = MultiViewSynthFactory()
        energy = MvsEnergy(synth, 'orb', seed=2)
        cameras = orbit(4)
        views = energy.targets(cameras, step=3)
        result = energy.evaluate(views, cameras, 0.5, step=3)
        assert result.value == 0.0
        assert torch.equal(result.grads, torch.zeros_like(views))

    def test_single_pixel(self):
        synth = MultiViewSynthFactory()
        energy = MvsEnergy(synth, 'orb', seed=2)
        cameras = orbit(2)
        views = energy.targets(cameras, step=0).double()
        views[1, 0, 4, 4] += 0.1
        result = energy.evaluate(views, cameras, 0.5, step=0)
        assert result.value == pytest.approx(-0.01, rel=1e-6)
        assert result.grads[1, 0, 4, 4].item() == pytest.approx(-0.2, rel=1e-6)

    def test_fresh_target_per_step(self):
        energy = MvsEnergy(MultiViewSynthFactory(), 'crate', seed=2)
        cameras = orbit(3)
        assert not torch.equal(energy.targets(cameras, 0), energy.targets(cameras, 1))
        assert torch.equal(energy.targets(cameras, 4), energy.targets(cameras, 4))

    def test_finite_differences(self):
        energy = MvsEnergy(MultiViewSynthFactory(), 'orb', seed=1)
        views = random_views(4, size=16)
        analytic = energy.evaluate(views, orbit(4), 0.5).grads
        numeric = finite_difference(energy, views, orbit(4), PIXELS)
        np.testing.assert_allclose([analytic[p].item() for p in PIXELS], numeric, rtol=1e-6)

    def test_out_of_range_pose_warns(self, caplog):
        energy = MvsEnergy(MultiViewSynthFactory(), 'orb')
        cameras = orbit(2, elevation=50.0)
        with caplog.at_level(logging.WARNING, logger='apps.energy.energies'):
            energy.evaluate(energy.targets(orbit(2), 0), cameras, 0.5)
        assert 'outside' in caplog.text

    def test_group_size(self):
        synth = MultiViewSynthFactory(group_size=2)
        with pytest.raises(ContractError):
            SynthService.generate(synth, 'orb', orbit(3))


class TestRandomDisturbance:
    def test_uniform_grads(self):
        grads = RandomDisturbanceEnergy(seed=1).evaluate(random_views(4), orbit(4), 0.5, step=2).grads
        assert grads.min().item() >= 0.0
        assert grads.max().item() < 1.0
        again = RandomDisturbanceEnergy(seed=1).evaluate(random_views(4), orbit(4), 0.5, step=2).grads
        assert torch.equal(grads, again)


class TestRegistry:
    def test_unknown(self):
        with pytest.raises(UnknownEnergyException):
            build_energy('cosine')

    def test_quadratic(self):
        energy = build_energy('quadratic', weight=0.5, kappa=0.25)
        assert isinstance(energy, QuadraticEnergy)
        assert energy.kappa == 0.25
        assert energy.weight == 0.5

    def test_learned_energy_loads_checkpoint(self, tmp_path):
        from apps.energy.services import ClassifierService

        path = ClassifierService.save(PairClassifierFactory(), tmp_path / 'classifier.pt')
        energy = build_energy('cls', checkpoint=path)
        assert isinstance(energy, ClsEnergy)
