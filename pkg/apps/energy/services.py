"""
Training, evaluation and persistence of the view-aware models.
"""
import logging
from dataclasses import asdict, dataclass, field

import torch
import torch.nn.functional as F

from core.checkpoints import CheckpointService
from core.exceptions import ContractError
from core.rng import derive_seed, seeded_generator
from apps.diffusion.exceptions import UnknownLabelException
from .exceptions import GroupSizeException, SingleObjectDatasetException
from .networks import MultiViewSynth, PairClassifier, ViewTranslator, absolute_pose, relative_poses
from .pairs import sample_pairs, sample_triples, sample_view_groups, split_objects

logger = logging.getLogger(__name__)

CLASSIFIER_COLUMNS = ('step', 'loss', 'held_out_loss', 'accuracy', 'held_out_accuracy')
LOSS_COLUMNS = ('step', 'loss', 'held_out_loss')

# Seed keys
_SPLIT_KEY = 0
_TRAIN_KEY = 1
_VALIDATION_KEY = 2
_INIT_KEY = 3


@dataclass(frozen=True)
class ClassifierTrainingConfig:
    steps: int = 1500
    batch_size: int = 64
    lr: float = 5e-4
    weight_decay: float = 0.04
    width: int = 32
    noise_max: float = 0.6
    validation_pairs: int = 512
    validation_fraction: float = 0.25
    eval_every: int = 100

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 2 or self.validation_pairs < 2:
            raise ContractError('steps, batch_size and validation_pairs are too small')


@dataclass(frozen=True)
class TranslatorTrainingConfig:
    steps: int = 1500
    batch_size: int = 32
    lr: float = 1e-3
    width: int = 32
    noise_max: float = 0.6
    validation_triples: int = 256
    validation_fraction: float = 0.25
    eval_every: int = 100

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1:
            raise ContractError('steps and batch_size must be positive')


@dataclass(frozen=True)
class SynthTrainingConfig:
    steps: int = 2000
    batch_objects: int = 8
    group_size: int = 4
    lr: float = 1e-3
    latent_dim: int = 8
    latent_reg: float = 1e-3
    width: int = 32
    validation_fraction: float = 0.25
    eval_every: int = 100

    def __post_init__(self):
        if self.steps < 1 or self.batch_objects < 1 or self.group_size < 1:
            raise ContractError('steps, batch_objects and group_size must be positive')


@dataclass
class TrainedModel:
    model: torch.nn.Module
    history: list
    metrics: dict = field(default_factory=dict)


def _init_model(factory, seed):
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(derive_seed(seed, _INIT_KEY))
        return factory()


def _check_dataset(dataset):
    if dataset is None or len(dataset) == 0:
        raise ContractError('Training dataset is empty')


def _eval_mode(model):
    was_training = model.training
    model.eval()
    return was_training


class ClassifierService:
    """Service for the pair classifier behind C_CLS"""

    KIND = 'classifier'

    @staticmethod
    def logits(model, first, second, pose):
        was_training = _eval_mode(model)
        with torch.no_grad():
            logits = model(first, second, pose)
        model.train(was_training)
        return logits

    @staticmethod
    def evaluate(model, pairs):
        """(mean BCE loss, accuracy) on a fixed pair batch"""
        logits = ClassifierService.logits(model, pairs.first, pairs.second, pairs.pose)
        loss = F.binary_cross_entropy_with_logits(logits, pairs.target).item()
        accuracy = ((logits > 0).float() == pairs.target).float().mean().item()
        return loss, accuracy

    @staticmethod
    def validation_pairs(dataset, config, seed):
        generator = seeded_generator(seed, _SPLIT_KEY)
        _, held_ids = split_objects(dataset, config.validation_fraction, generator)
        return sample_pairs(dataset, held_ids, config.validation_pairs, seeded_generator(seed, _VALIDATION_KEY),
                            config.noise_max, augment=False)

    @staticmethod
    def train_classifier(dataset, config=None, seed=0):
        """
        Train M_CLS on balanced positive / negative pairs.

        Returns:
            TrainedModel whose history rows carry loss and accuracy on the
            training batch and, at evaluation steps, on the validation pairs.
        """
        config = config or ClassifierTrainingConfig()
        _check_dataset(dataset)
        if len(dataset.indices_by_object()) < 2:
            raise SingleObjectDatasetException()

        train_ids, held_ids = split_objects(dataset, config.validation_fraction, seeded_generator(seed, _SPLIT_KEY))
        validation = ClassifierService.validation_pairs(dataset, config, seed)
        model = _init_model(lambda: PairClassifier(width=config.width), seed)
        optimizer = torch.optim.AdamW(model.parameters(), lr=config.lr, weight_decay=config.weight_decay)

        initial_loss, initial_accuracy = ClassifierService.evaluate(model, validation)
        logger.info(f"Training classifier on {len(train_ids)} objects ({len(held_ids)} for validation), "
                    f"initial accuracy {initial_accuracy:.3f}")

        generator = seeded_generator(seed, _TRAIN_KEY)
        history = []
        held_loss, held_accuracy = initial_loss, initial_accuracy
        model.train()
        for step in range(1, config.steps + 1):
            batch = sample_pairs(dataset, train_ids, config.batch_size, generator, config.noise_max)
            logits = model(batch.first, batch.second, batch.pose)
            loss = F.binary_cross_entropy_with_logits(logits, batch.target)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()

            row = {
                'step': step,
                'loss': loss.item(),
                'accuracy': ((logits.detach() > 0).float() == batch.target).float().mean().item(),
            }
            if step % config.eval_every == 0 or step == config.steps:
                held_loss, held_accuracy = ClassifierService.evaluate(model, validation)
                row['held_out_loss'] = held_loss
                row['held_out_accuracy'] = held_accuracy
                logger.info(f"classifier step {step}: loss {row['loss']:.4f}, "
                            f"validation accuracy {held_accuracy:.3f}")
            history.append(row)

        model.eval()
        metrics = {
            'initial_accuracy': initial_accuracy,
            'held_out_accuracy': held_accuracy,
            'held_out_loss': held_loss,
        }
        return TrainedModel(model, history, metrics)

    @staticmethod
    def save(model, path, config=None):
        metadata = {'architecture': model.architecture(), 'training': asdict(config) if config else {}}
        return CheckpointService.save(path, ClassifierService.KIND, model.state_dict(), metadata)

    @staticmethod
    def load(path):
        state_dict, metadata = CheckpointService.load(path, ClassifierService.KIND)
        model = PairClassifier(**metadata.get('architecture', {}))
        model.load_state_dict(state_dict)
        return model.eval()


class TranslatorService:
    """Service for the view translator behind C_I2I"""

    KIND = 'translator'

    @staticmethod
    def translate(model, source, targets, references):
        """Predict views at `targets` from `source` images seen from `references`"""
        return model(source, relative_poses(targets, references).to(source))

    @staticmethod
    def reconstruction_errors(model, triples):
        """Per-triple mean squared error of the translation and of copying the source"""
        was_training = _eval_mode(model)
        with torch.no_grad():
            prediction = model(triples.source, triples.pose)
        model.train(was_training)
        translated = ((prediction - triples.target) ** 2).flatten(1).mean(dim=1)
        copied = ((triples.clean_source - triples.target) ** 2).flatten(1).mean(dim=1)
        return translated, copied

    @staticmethod
    def train_view_translator(dataset, config=None, seed=0):
        config = config or TranslatorTrainingConfig()
        _check_dataset(dataset)

        train_ids, held_ids = split_objects(dataset, config.validation_fraction, seeded_generator(seed, _SPLIT_KEY))
        validation = sample_triples(dataset, held_ids, config.validation_triples,
                                    seeded_generator(seed, _VALIDATION_KEY), config.noise_max)
        model = _init_model(lambda: ViewTranslator(width=config.width), seed)
        optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)

        generator = seeded_generator(seed, _TRAIN_KEY)
        history = []
        held_loss = None
        model.train()
        for step in range(1, config.steps + 1):
            batch = sample_triples(dataset, train_ids, config.batch_size, generator, config.noise_max)
            loss = F.mse_loss(model(batch.source, batch.pose), batch.target)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()

            row = {'step': step, 'loss': loss.item()}
            if step % config.eval_every == 0 or step == config.steps:
                held_loss = TranslatorService.reconstruction_errors(model, validation)[0].mean().item()
                row['held_out_loss'] = held_loss
                logger.info(f"translator step {step}: loss {row['loss']:.4f}, held-out {held_loss:.4f}")
            history.append(row)

        model.eval()
        translated, copied = TranslatorService.reconstruction_errors(model, validation)
        metrics = {'held_out_error': translated.mean().item(), 'identity_copy_error': copied.mean().item()}
        logger.info(f"Translator held-out error {metrics['held_out_error']:.4f} "
                    f"vs identity copy {metrics['identity_copy_error']:.4f}")
        return TrainedModel(model, history, metrics)

    @staticmethod
    def save(model, path, config=None):
        metadata = {'architecture': model.architecture(), 'training': asdict(config) if config else {}}
        return CheckpointService.save(path, TranslatorService.KIND, model.state_dict(), metadata)

    @staticmethod
    def load(path):
        state_dict, metadata = CheckpointService.load(path, TranslatorService.KIND)
        model = ViewTranslator(**metadata.get('architecture', {}))
        model.load_state_dict(state_dict)
        return model.eval()


class SynthService:
    """Service for the multi-view synthesis model behind C_MVS"""

    KIND = 'mvs'

    @staticmethod
    def camera_ranges(dataset):
        elevations = [record.camera.elevation for record in dataset.records]
        radii = [record.camera.radius for record in dataset.records]
        return {'elevation': [min(elevations), max(elevations)], 'radius': [min(radii), max(radii)]}

    @staticmethod
    def generate(model, label, cameras, generator=None, latent=None):
        """
        V views of one object of class `label`, one image per camera.

        The object latent is drawn from `generator` unless given.
        """
        if len(cameras) > model.group_size:
            raise GroupSizeException(f"{len(cameras)} views requested, model trained on groups of {model.group_size}")
        if label not in model.labels:
            raise UnknownLabelException(f"Label {label!r} unknown to the synthesis model")
        if latent is None:
            draw = torch.randn(model.latent_dim, generator=generator, dtype=model.latent_std.dtype)
            latent = draw * model.latent_std
        count = len(cameras)
        label_idx = torch.full((count,), model.labels.index(label), dtype=torch.long)
        poses = torch.stack([absolute_pose(camera) for camera in cameras])
        was_training = _eval_mode(model)
        with torch.no_grad():
            views = model.decode(label_idx, latent.expand(count, -1), poses)
        model.train(was_training)
        return views

    @staticmethod
    def held_out_errors(model, dataset, object_ids, baseline):
        """(per-view error with the mean latent, per-view error of the label mean image)"""
        groups = dataset.indices_by_object()
        images = dataset.model_images()
        indices = [i for object_id in object_ids for i in groups[object_id]]
        records = [dataset.records[i] for i in indices]
        zero = torch.zeros(model.latent_dim)
        generated = torch.cat([
            SynthService.generate(model, record.label, [record.camera], latent=zero) for record in records
        ])
        target = images[indices]
        mean_images = torch.stack([baseline[record.label] for record in records])
        synth_error = ((generated - target) ** 2).flatten(1).mean(dim=1)
        baseline_error = ((mean_images - target) ** 2).flatten(1).mean(dim=1)
        return synth_error, baseline_error

    @staticmethod
    def label_means(dataset, object_ids):
        groups = dataset.indices_by_object()
        images = dataset.model_images()
        sums = {}
        for object_id in object_ids:
            for index in groups[object_id]:
                sums.setdefault(dataset.records[index].label, []).append(images[index])
        return {label: torch.stack(views).mean(dim=0) for label, views in sums.items()}

    @staticmethod
    def train_mvs_model(dataset, config=None, seed=0):
        """
        Fit the pose-conditioned generator as an auto-decoder: every training
        object owns a latent code optimised jointly with the network.
        """
        config = config or SynthTrainingConfig()
        _check_dataset(dataset)

        train_ids, held_ids = split_objects(dataset, config.validation_fraction, seeded_generator(seed, _SPLIT_KEY))
        object_index = {object_id: i for i, object_id in enumerate(train_ids)}
        labels = dataset.labels
        label_index = {label: i for i, label in enumerate(labels)}
        model = _init_model(lambda: MultiViewSynth(
            labels, image_size=dataset.image_size, latent_dim=config.latent_dim, width=config.width,
            group_size=config.group_size, camera_ranges=SynthService.camera_ranges(dataset),
            num_objects=len(train_ids),
        ), seed)
        optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
        baseline = SynthService.label_means(dataset, train_ids)

        generator = seeded_generator(seed, _TRAIN_KEY)
        history = []
        model.train()
        for step in range(1, config.steps + 1):
            batch = sample_view_groups(dataset, train_ids, object_index, label_index,
                                       config.batch_objects, config.group_size, generator)
            latent = model.latents(batch.object_index)
            prediction = model.decode(batch.label_index, latent, batch.pose)
            loss = F.mse_loss(prediction, batch.target) + config.latent_reg * (latent ** 2).sum(dim=1).mean()
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()

            row = {'step': step, 'loss': loss.item()}
            if step % config.eval_every == 0 or step == config.steps:
                with torch.no_grad():
                    model.latent_std.copy_(model.latents.weight.std(dim=0, unbiased=False).clamp_min(1e-3))
                held = SynthService.held_out_errors(model, dataset, held_ids, baseline)[0].mean().item()
                row['held_out_loss'] = held
                logger.info(f"mvs step {step}: loss {row['loss']:.4f}, held-out {held:.4f}")
            history.append(row)

        model.eval()
        synth_error, baseline_error = SynthService.held_out_errors(model, dataset, held_ids, baseline)
        metrics = {'held_out_error': synth_error.mean().item(), 'label_mean_error': baseline_error.mean().item()}
        return TrainedModel(model, history, metrics)

    @staticmethod
    def save(model, path, config=None):
        metadata = {'architecture': model.architecture(), 'training': asdict(config) if config else {}}
        return CheckpointService.save(path, SynthService.KIND, model.state_dict(), metadata)

    @staticmethod
    def load(path):
        state_dict, metadata = CheckpointService.load(path, SynthService.KIND)
        model = MultiViewSynth(**metadata.get('architecture', {}))
        model.load_state_dict(state_dict)
        return model.eval()