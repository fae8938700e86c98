import math

import pytest
import torch

from core.exceptions import CheckpointError, ContractError, DomainError
from core.checkpoints import CheckpointService
from apps.scene.cameras import VIEW_BUCKETS
from apps.scene.datasets import MultiViewDataset, generate_dataset
from apps.scene.tests.factories import DatasetConfigFactory
from apps.diffusion.exceptions import (
    EmptyDatasetException,
    ResolutionMismatchException,
    UnknownLabelException,
)
from apps.diffusion.schedule import cfg_combine
from apps.diffusion.services import DenoiserService
from .factories import DenoiserModelFactory, DiffusionTrainingConfigFactory


@pytest.fixture(scope='module')
def dataset():
    return generate_dataset(DatasetConfigFactory(views_per_object=8), seed=0)


@pytest.fixture(scope='module')
def trained(dataset):
    config = DiffusionTrainingConfigFactory(epochs=30)
    return DenoiserService.train_toy_diffusion(dataset, config, seed=0)


class TestPredictNoise:
    def test_shape(self):
        model = DenoiserModelFactory()
        x_t = torch.randn(3, 16, 16)
        assert DenoiserService.predict_noise(model, x_t, 0.5, 'orb', 'front').shape == (3, 16, 16)

    def test_batched_shape(self):
        model = DenoiserModelFactory()
        x_t = torch.randn(4, 3, 16, 16)
        eps = DenoiserService.predict_noise(model, x_t, torch.full((4,), 0.3), 'crate', list(VIEW_BUCKETS))
        assert eps.shape == x_t.shape

    def test_deterministic(self):
        model = DenoiserModelFactory()
        x_t = torch.randn(3, 16, 16)
        first = DenoiserService.predict_noise(model, x_t, 0.7, 'orb', 'side')
        second = DenoiserService.predict_noise(model, x_t, 0.7, 'orb', 'side')
        assert torch.equal(first, second)

    def test_null_label_allowed(self):
        model = DenoiserModelFactory()
        eps = DenoiserService.predict_noise(model, torch.randn(3, 16, 16), 0.5, None, None)
        assert torch.isfinite(eps).all()

    def test_unknown_label(self):
        with pytest.raises(UnknownLabelException):
            DenoiserService.predict_noise(DenoiserModelFactory(), torch.randn(3, 16, 16), 0.5, 'teapot')

    def test_unknown_label_is_contract_error(self):
        with pytest.raises(ContractError):
            DenoiserService.predict_noise(DenoiserModelFactory(), torch.randn(3, 16, 16), 0.5, 'teapot')

    def test_wrong_resolution(self):
        with pytest.raises(ResolutionMismatchException):
            DenoiserService.predict_noise(DenoiserModelFactory(), torch.randn(3, 32, 32), 0.5, 'orb')

    def test_timestep_domain(self):
        with pytest.raises(DomainError):
            DenoiserService.predict_noise(DenoiserModelFactory(), torch.randn(3, 16, 16), 1.2, 'orb')

    def test_guided_noise(self):
        model = DenoiserModelFactory()
        x_t = torch.randn(3, 16, 16)
        cond = DenoiserService.predict_noise(model, x_t, 0.4, 'orb', 'back')
        uncond = DenoiserService.predict_noise(model, x_t, 0.4)
        guided = DenoiserService.guided_noise(model, x_t, 0.4, 'orb', 'back', 30.0)
        assert torch.allclose(guided, cfg_combine(cond, uncond, 30.0))

    def test_untrained_flag(self):
        assert DenoiserModelFactory().trained is False


class TestTrainToyDiffusion:
    def test_history_length(self, dataset):
        result = DenoiserService.train_toy_diffusion(dataset, DiffusionTrainingConfigFactory(), seed=1)
        assert len(dataset) == 16
        assert result.steps == len(result.history) == 2
        assert [row['step'] for row in result.history] == [1, 2]
        assert result.history[-1]['held_out_loss'] is not None
        assert result.model.trained

    def test_seeded(self, dataset):
        first = DenoiserService.train_toy_diffusion(dataset, DiffusionTrainingConfigFactory(), seed=4)
        second = DenoiserService.train_toy_diffusion(dataset, DiffusionTrainingConfigFactory(), seed=4)
        assert [row['loss'] for row in first.history] == [row['loss'] for row in second.history]

    def test_held_out_loss_decreases(self, trained):
        assert trained.final_held_out_loss < trained.initial_held_out_loss
        assert all(math.isfinite(row['loss']) for row in trained.history)

    def test_beats_untrained_model(self, dataset, trained):
        train, held = DenoiserService.split_dataset(dataset, 0.25, seed=9)
        batch = DenoiserService.held_out_batch(trained.model, dataset, held, seed=9)
        untrained = DenoiserModelFactory(labels=trained.model.labels)
        assert DenoiserService.held_out_loss(trained.model, batch) < DenoiserService.held_out_loss(untrained, batch)

    def test_condition_sensitivity(self, trained):
        x_t = torch.randn(3, 16, 16, generator=torch.Generator().manual_seed(0))
        orb = DenoiserService.predict_noise(trained.model, x_t, 0.5, 'orb', 'front')
        crate = DenoiserService.predict_noise(trained.model, x_t, 0.5, 'crate', 'front')
        assert (orb - crate).norm().item() > 0.0

    def test_bucket_report(self, trained, dataset):
        present = {record.bucket for record in dataset.records}
        assert set(trained.bucket_losses) == present
        assert all(math.isfinite(value) for value in trained.bucket_losses.values())

    def test_empty_dataset(self):
        empty = MultiViewDataset(torch.zeros(0, 3, 16, 16), [])
        with pytest.raises(EmptyDatasetException):
            DenoiserService.train_toy_diffusion(empty, DiffusionTrainingConfigFactory())

    def test_split_keeps_every_view(self, dataset):
        train, held = DenoiserService.split_dataset(dataset, 0.25, seed=0)
        assert len(held) == 4
        assert sorted(train + held) == list(range(16))


class TestCheckpoint:
    def test_save_and_load(self, trained, tmp_path):
        path = DenoiserService.save(trained.model, tmp_path / 'denoiser.pt')
        model, schedule = DenoiserService.load(path)
        assert model.labels == trained.model.labels
        assert model.trained
        assert schedule.num_steps == 1000
        x_t = torch.randn(3, 16, 16)
        assert torch.equal(
            DenoiserService.predict_noise(model, x_t, 0.5, 'orb', 'front'),
            DenoiserService.predict_noise(trained.model, x_t, 0.5, 'orb', 'front'),
        )

    def test_wrong_kind(self, tmp_path):
        path = CheckpointService.save(tmp_path / 'other.pt', 'classifier', {'w': torch.zeros(1)})
        with pytest.raises(CheckpointError):
            DenoiserService.load(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            DenoiserService.load(tmp_path / 'absent.pt')
