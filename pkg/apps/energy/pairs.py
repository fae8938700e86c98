"""
Training examples for the view-aware models.

Positive pairs are two views of one object with their true relative pose.
Negatives are either views of two different objects with the cameras' true
relative pose, or views of one object with a pose at least 60 degrees off.
"""
from dataclasses import dataclass
from typing import List

import torch

from core.exceptions import ContractError
from apps.diffusion.schedule import DEFAULT_SCHEDULE, batch_diffuse
from apps.scene.cameras import Camera, azimuth_gap
from .exceptions import SingleObjectDatasetException
from .networks import absolute_pose, relative_poses

POSITIVE = 'positive'
WRONG_OBJECT = 'wrong_object'
WRONG_POSE = 'wrong_pose'

MIN_POSE_ERROR = 60.0


@dataclass
class PairBatch:
    first: torch.Tensor
    second: torch.Tensor
    pose: torch.Tensor
    target: torch.Tensor
    kinds: List[str]

    def __len__(self):
        return len(self.kinds)


@dataclass
class TripleBatch:
    source: torch.Tensor
    clean_source: torch.Tensor
    pose: torch.Tensor
    target: torch.Tensor
    gaps: List[float]


@dataclass
class ViewGroupBatch:
    object_index: torch.Tensor
    label_index: torch.Tensor
    pose: torch.Tensor
    target: torch.Tensor


def _pick(items, generator):
    return items[int(torch.randint(len(items), (1,), generator=generator).item())]


def _uniform(generator, low, high):
    return low + (high - low) * torch.rand(1, generator=generator, dtype=torch.float64).item()


def _two_views(indices, generator):
    first = _pick(indices, generator)
    others = [i for i in indices if i != first] or indices
    return first, _pick(others, generator)


def split_objects(dataset, fraction, generator):
    """
    Object-level split into (train_ids, held_out_ids).

    Held-out objects are only used when at least two remain on each side;
    otherwise validation reuses the training objects.
    """
    ids = list(dataset.indices_by_object())
    order = torch.randperm(len(ids), generator=generator).tolist()
    ids = [ids[i] for i in order]
    held = int(round(len(ids) * fraction))
    if held < 2 or len(ids) - held < 2:
        return ids, ids
    return ids[held:], ids[:held]


def noise_augment(images, generator, noise_max, t=None):
    """Forward-diffuse a batch at t ~ U(0, noise_max) per image (or at the given t)"""
    if noise_max <= 0:
        return images
    if t is None:
        t = torch.rand(images.shape[0], generator=generator, dtype=images.dtype) * noise_max
    eps = torch.randn(images.shape, generator=generator, dtype=images.dtype)
    return batch_diffuse(images, t, eps, DEFAULT_SCHEDULE)


def colour_jitter(first, second, generator, strength=0.1):
    """Shared brightness gain per pair, applied in [0, 1] space"""
    gain = 1.0 + strength * (2.0 * torch.rand(first.shape[0], generator=generator, dtype=first.dtype) - 1.0)
    gain = gain.view(-1, 1, 1, 1)
    return ((first + 1) * gain - 1).clamp(-1, 1), ((second + 1) * gain - 1).clamp(-1, 1)


def sample_pairs(dataset, object_ids, count, generator, noise_max=0.6, augment=True):
    """Balanced pairs: half positive, the negatives split evenly between the two kinds"""
    groups = dataset.indices_by_object()
    object_ids = [object_id for object_id in object_ids if object_id in groups]
    if len(object_ids) < 2:
        raise SingleObjectDatasetException(f"Pair sampling needs two objects, got {len(object_ids)}")

    images = dataset.model_images()
    records = dataset.records
    first, second, targets, sources, labels, kinds = [], [], [], [], [], []
    for k in range(count):
        a = _pick(object_ids, generator)
        i, j = _two_views(groups[a], generator)
        source, target = records[i].camera, records[j].camera
        if k % 2 == 0:
            kind = POSITIVE
        else:
            kind = WRONG_OBJECT if torch.rand(1, generator=generator).item() < 0.5 else WRONG_POSE
        if kind == WRONG_OBJECT:
            b = _pick([o for o in object_ids if o != a], generator)
            j = _pick(groups[b], generator)
            target = records[j].camera
        elif kind == WRONG_POSE:
            offset = _uniform(generator, MIN_POSE_ERROR, 360.0 - MIN_POSE_ERROR)
            target = Camera(target.azimuth + offset, target.elevation, target.radius, target.fov)
        first.append(i)
        second.append(j)
        targets.append(target)
        sources.append(source)
        labels.append(1.0 if kind == POSITIVE else 0.0)
        kinds.append(kind)

    x_first, x_second = images[first], images[second]
    if augment:
        x_first, x_second = colour_jitter(x_first, x_second, generator)
    t = torch.rand(count, generator=generator, dtype=x_first.dtype) * noise_max
    return PairBatch(
        first=noise_augment(x_first, generator, noise_max, t),
        second=noise_augment(x_second, generator, noise_max, t),
        pose=relative_poses(targets, sources),
        target=torch.tensor(labels),
        kinds=kinds,
    )


def sample_triples(dataset, object_ids, count, generator, noise_max=0.6):
    """(noised source view, Δ(target, source), clean target view) of one object"""
    groups = dataset.indices_by_object()
    object_ids = [object_id for object_id in object_ids if object_id in groups]
    if not object_ids:
        raise ContractError('Triple sampling needs at least one object')

    images = dataset.model_images()
    records = dataset.records
    sources, targets, source_cams, target_cams, gaps = [], [], [], [], []
    for _ in range(count):
        i, j = _two_views(groups[_pick(object_ids, generator)], generator)
        sources.append(i)
        targets.append(j)
        source_cams.append(records[i].camera)
        target_cams.append(records[j].camera)
        gaps.append(azimuth_gap(records[i].camera.azimuth, records[j].camera.azimuth))

    clean = images[sources]
    return TripleBatch(
        source=noise_augment(clean, generator, noise_max),
        clean_source=clean,
        pose=relative_poses(target_cams, source_cams),
        target=images[targets],
        gaps=gaps,
    )


def sample_view_groups(dataset, object_ids, object_index, label_index, objects, group_size, generator):
    """`objects` objects with `group_size` views each, flattened to one batch"""
    groups = dataset.indices_by_object()
    images = dataset.model_images()
    chosen, object_rows, label_rows, poses = [], [], [], []
    for _ in range(objects):
        object_id = _pick(object_ids, generator)
        views = groups[object_id]
        order = torch.randperm(len(views), generator=generator).tolist()
        picks = [views[order[k % len(views)]] for k in range(group_size)]
        for index in picks:
            record = dataset.records[index]
            chosen.append(index)
            object_rows.append(object_index[object_id])
            label_rows.append(label_index[record.label])
            poses.append(absolute_pose(record.camera))
    return ViewGroupBatch(
        object_index=torch.tensor(object_rows, dtype=torch.long),
        label_index=torch.tensor(label_rows, dtype=torch.long),
        pose=torch.stack(poses),
        target=images[chosen],
    )
