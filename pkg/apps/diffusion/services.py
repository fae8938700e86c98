"""
Inference, training and persistence of the toy denoiser.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import torch
import torch.nn.functional as F
from django.conf import settings

from core.checkpoints import CheckpointService
from core.exceptions import ContractError, DomainError
from core.rng import derive_seed, seeded_generator
from apps.scene.cameras import VIEW_BUCKETS
from .exceptions import EmptyDatasetException, ResolutionMismatchException, UnknownLabelException
from .networks import DenoiserModel
from .schedule import DEFAULT_SCHEDULE, NoiseSchedule, batch_diffuse, cfg_combine

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = 'denoiser'
LOSS_COLUMNS = ('step', 'loss', 'held_out_loss')

# Seed keys for the training streams
_SPLIT_KEY = 0
_BATCH_KEY = 1
_HELD_OUT_KEY = 2
_INIT_KEY = 3


@dataclass(frozen=True)
class DiffusionTrainingConfig:
    epochs: int = 40
    batch_size: int = 32
    lr: float = 1e-3
    base_channels: int = 32
    condition_dropout: float = 0.1
    held_out_fraction: float = 0.1
    eval_every: int = 50
    grad_clip: float = 1.0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ContractError('epochs and batch_size must be positive')
        if not 0.0 <= self.condition_dropout < 1.0:
            raise ContractError('condition_dropout must lie in [0, 1)')
        if not 0.0 <= self.held_out_fraction < 1.0:
            raise ContractError('held_out_fraction must lie in [0, 1)')


@dataclass
class HeldOutBatch:
    """Held-out images with draws fixed once, so losses are comparable across steps"""
    images: torch.Tensor
    labels: torch.Tensor
    views: torch.Tensor
    t: torch.Tensor
    eps: torch.Tensor
    buckets: List[str] = field(default_factory=list)


@dataclass
class TrainingResult:
    model: DenoiserModel
    history: list
    initial_held_out_loss: Optional[float] = None
    final_held_out_loss: Optional[float] = None
    bucket_losses: dict = field(default_factory=dict)

    @property
    def steps(self):
        return len(self.history)


def _device():
    return torch.device(settings.LAB.get('DEVICE', 'cpu'))


class DenoiserService:
    """Service for evaluating and training the toy noise predictor"""

    @staticmethod
    def _indices(model, values, vocabulary, index_of, batch, kind):
        if values is None or isinstance(values, str):
            values = [values] * batch
        values = list(values)
        if len(values) != batch:
            raise ContractError(f"Expected {batch} {kind} entries, got {len(values)}")
        indices = []
        for value in values:
            if value is not None and value not in vocabulary:
                if kind == 'label':
                    raise UnknownLabelException(f"Unknown label {value!r}; known labels: {model.labels}")
                raise ContractError(f"Unknown view bucket {value!r}")
            indices.append(index_of(value))
        return torch.tensor(indices, dtype=torch.long, device=next(model.parameters()).device)

    @staticmethod
    def predict_noise(model, x_t, t, y=None, view=None):
        """
        Evaluate ε_Φ(x_t, t, y, view) without tracking gradients.

        Args:
            x_t: Noised image [3, H, W] or batch [B, 3, H, W] in model space
            t: Timestep in [0, 1], a float or a tensor [B]
            y: Label, a list of labels, or None for ∅
            view: View bucket, a list of buckets, or None

        Returns:
            Predicted noise with the shape of x_t
        """
        single = x_t.dim() == 3
        batch = x_t.unsqueeze(0) if single else x_t
        if batch.dim() != 4 or batch.shape[1] != 3:
            raise ContractError(f"Expected images shaped (3, H, W) or (B, 3, H, W), got {tuple(x_t.shape)}")
        if tuple(batch.shape[-2:]) != (model.image_size, model.image_size):
            raise ResolutionMismatchException(
                f"Model expects {model.image_size}x{model.image_size}, got {tuple(batch.shape[-2:])}"
            )

        parameter = next(model.parameters())
        size = batch.shape[0]
        t = torch.as_tensor(t, dtype=parameter.dtype, device=parameter.device).reshape(-1)
        if t.numel() == 1:
            t = t.expand(size)
        if (t < 0).any() or (t > 1).any():
            raise DomainError('Timesteps outside [0, 1]')

        labels = DenoiserService._indices(model, y, model.labels, model.label_index, size, 'label')
        views = DenoiserService._indices(model, view, VIEW_BUCKETS, model.view_index, size, 'view')

        was_training = model.training
        model.eval()
        with torch.no_grad():
            eps = model(batch.to(parameter), t, labels, views).to(x_t.dtype)
        model.train(was_training)
        return eps[0] if single else eps

    @staticmethod
    def guided_noise(model, x_t, t, y, view, scale):
        """Classifier-free guided prediction; the unconditional pass drops label and view"""
        eps_cond = DenoiserService.predict_noise(model, x_t, t, y, view)
        if scale == 0:
            return cfg_combine(eps_cond, eps_cond, 0.0)
        eps_uncond = DenoiserService.predict_noise(model, x_t, t, None, None)
        return cfg_combine(eps_cond, eps_uncond, scale)

    @staticmethod
    def split_dataset(dataset, fraction, seed):
        """
        Split view indices into (train, held_out).

        When the fraction leaves no held-out view, the training views double
        as the held-out set.
        """
        count = len(dataset)
        generator = seeded_generator(seed, _SPLIT_KEY)
        order = torch.randperm(count, generator=generator).tolist()
        held = int(math.floor(count * fraction))
        if held == 0 or held == count:
            return order, order
        return order[held:], order[:held]

    @staticmethod
    def held_out_batch(model, dataset, indices, seed):
        generator = seeded_generator(seed, _HELD_OUT_KEY)
        images = dataset.model_images()[indices]
        records = [dataset.records[i] for i in indices]
        t = torch.rand(len(indices), generator=generator, dtype=images.dtype)
        eps = torch.randn(images.shape, generator=generator, dtype=images.dtype)
        return HeldOutBatch(
            images=images,
            labels=torch.tensor([model.label_index(r.label) for r in records], dtype=torch.long),
            views=torch.tensor([model.view_index(r.bucket) for r in records], dtype=torch.long),
            t=t,
            eps=eps,
            buckets=[r.bucket for r in records],
        )

    @staticmethod
    def denoising_losses(model, held_out, schedule=DEFAULT_SCHEDULE):
        """Per-image denoising MSE on a held-out batch [N]"""
        device = next(model.parameters()).device
        was_training = model.training
        model.eval()
        with torch.no_grad():
            x_t = batch_diffuse(held_out.images, held_out.t, held_out.eps, schedule).to(device)
            prediction = model(x_t, held_out.t.to(device), held_out.labels.to(device), held_out.views.to(device))
            losses = ((prediction.cpu() - held_out.eps) ** 2).flatten(1).mean(dim=1)
        model.train(was_training)
        return losses

    @staticmethod
    def held_out_loss(model, held_out, schedule=DEFAULT_SCHEDULE):
        return DenoiserService.denoising_losses(model, held_out, schedule).mean().item()

    @staticmethod
    def per_bucket_loss(model, held_out, schedule=DEFAULT_SCHEDULE):
        """Mean held-out denoising loss per view bucket present in the batch"""
        losses = DenoiserService.denoising_losses(model, held_out, schedule)
        report = {}
        for bucket in VIEW_BUCKETS:
            mask = torch.tensor([b == bucket for b in held_out.buckets], dtype=torch.bool)
            if mask.any():
                report[bucket] = losses[mask].mean().item()
        return report

    @staticmethod
    def train_toy_diffusion(dataset, config=None, seed=0, schedule=DEFAULT_SCHEDULE):
        """
        Train a conditional denoiser on a labelled multi-view dataset.

        Labels and views are dropped together to ∅ with probability
        `condition_dropout`, so the same network serves both CFG passes.

        Returns:
            TrainingResult; `history` has one row per optimiser step.
        """
        config = config or DiffusionTrainingConfig()
        if dataset is None or len(dataset) == 0:
            raise EmptyDatasetException()

        device = _device()
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(derive_seed(seed, _INIT_KEY))
            model = DenoiserModel(dataset.labels, image_size=dataset.image_size,
                                  base_channels=config.base_channels, num_steps=schedule.num_steps)
        model = model.to(device)
        optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)

        train_indices, held_indices = DenoiserService.split_dataset(dataset, config.held_out_fraction, seed)
        held_out = DenoiserService.held_out_batch(model, dataset, held_indices, seed)
        images = dataset.model_images()
        labels = torch.tensor([model.label_index(r.label) for r in dataset.records], dtype=torch.long)
        views = torch.tensor([model.view_index(r.bucket) for r in dataset.records], dtype=torch.long)

        initial = DenoiserService.held_out_loss(model, held_out, schedule)
        logger.info(f"Training denoiser on {len(train_indices)} views "
                    f"({len(held_indices)} held out), initial held-out loss {initial:.4f}")

        generator = seeded_generator(seed, _BATCH_KEY)
        batches_per_epoch = math.ceil(len(train_indices) / config.batch_size)
        total = config.epochs * batches_per_epoch
        history = []
        held_loss = initial
        step = 0
        model.train()
        for epoch in range(config.epochs):
            order = torch.randperm(len(train_indices), generator=generator).tolist()
            for b in range(batches_per_epoch):
                chosen = [train_indices[i] for i in order[b * config.batch_size:(b + 1) * config.batch_size]]
                x0 = images[chosen]
                t = torch.rand(len(chosen), generator=generator, dtype=x0.dtype)
                eps = torch.randn(x0.shape, generator=generator, dtype=x0.dtype)
                dropped = torch.rand(len(chosen), generator=generator) < config.condition_dropout
                batch_labels = torch.where(dropped, model.null_label, labels[chosen])
                batch_views = torch.where(dropped, model.null_view, views[chosen])

                x_t = batch_diffuse(x0, t, eps, schedule)
                prediction = model(x_t.to(device), t.to(device), batch_labels.to(device), batch_views.to(device))
                loss = F.mse_loss(prediction, eps.to(device))
                optimizer.zero_grad()
                loss.backward()
                torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
                optimizer.step()

                step += 1
                row = {'step': step, 'loss': loss.item(), 'held_out_loss': None}
                if step % config.eval_every == 0 or step == total:
                    held_loss = DenoiserService.held_out_loss(model, held_out, schedule)
                    row['held_out_loss'] = held_loss
                    logger.info(f"epoch {epoch + 1} step {step}/{total}: loss {row['loss']:.4f}, "
                                f"held-out {held_loss:.4f}")
                history.append(row)

        model.trained = True
        model.eval()
        buckets = DenoiserService.per_bucket_loss(model, held_out, schedule)
        logger.info(f"Per-bucket held-out loss: {buckets}")
        return TrainingResult(model, history, initial, held_loss, buckets)

    @staticmethod
    def save(model, path, schedule=DEFAULT_SCHEDULE, training=None):
        metadata = {
            'architecture': model.architecture(),
            'schedule': schedule.describe(),
            'view_vocab': list(VIEW_BUCKETS),
            'trained': bool(model.trained),
            'training': asdict(training) if training else {},
        }
        return CheckpointService.save(path, CHECKPOINT_KIND, model.state_dict(), metadata)

    @staticmethod
    def load(path):
        """Returns (model, schedule)"""
        state_dict, metadata = CheckpointService.load(path, CHECKPOINT_KIND)
        architecture = metadata.get('architecture', {})
        model = DenoiserModel(**architecture)
        model.load_state_dict(state_dict)
        model.trained = metadata.get('trained', False)
        model.eval()
        schedule = NoiseSchedule.from_descriptor(metadata.get('schedule', DEFAULT_SCHEDULE.describe()))
        return model.to(_device()), schedule
