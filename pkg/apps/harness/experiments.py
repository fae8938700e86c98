"""
Experiment drivers over many distillation runs.

A sweep runs methods x labels x seeds and scores every run by its Janus
verdict, post-warmup loss smoothness and label-conditioned held-out render
error. The baseline grid sweeps the (lambda_sds, lambda_view) weights of the
naive SDS + multi-view combination and compares it with a JSD reference.
"""
import json
import logging
from dataclasses import asdict, dataclass, replace
from itertools import product
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import torch

from core.exceptions import ContractError
from core.utils.csvlog import write_rows
from apps.scene.rendering import RenderOptions, render
from apps.scene.services import SceneService
from apps.energy.energies import ENERGIES
from .exceptions import NoHeldOutViewsException, ShortSeriesException, UnknownMethodException
from .metrics import DetectorSettings, detect_janus, final_scene_path, loss_smoothness
from .runs import COMBINED, JSD, LEARNED_ENERGIES, SDS, run_distillation

logger = logging.getLogger(__name__)

DEFAULT_METHODS = ('sds', 'jsd-cls', 'jsd-i2i', 'jsd-mvs')
DEFAULT_ENERGY_CHECKPOINTS = {
    'cls': 'checkpoints/classifier.pt',
    'i2i': 'checkpoints/translator.pt',
    'mvs': 'checkpoints/mvs.pt',
}
DEFAULT_LAMBDAS = (0.0, 0.25, 0.5, 0.75, 1.0)

SWEEP_CSV = 'sweep.csv'
SWEEP_SUMMARY = 'sweep_summary.json'
SWEEP_COLUMNS = ('method', 'label', 'seed', 'janus', 'smoothness', 'render_error', 'directory')
GRID_CSV = 'baseline_grid.csv'
GRID_SUMMARY = 'baseline_grid.json'
GRID_COLUMNS = ('lambda_sds', 'lambda_view', 'janus_rate', 'render_error', 'pareto', 'matches_reference')


@dataclass(frozen=True)
class MethodSpec:
    key: str
    method: str
    energy: Optional[str] = None
    lambda_sds: float = 0.0
    lambda_view: float = 0.0


def parse_method(key):
    """
    Method keys: 'sds', 'jsd' (configured energy), 'jsd-<energy>' and
    'combined-<lambda_sds>-<lambda_view>'.
    """
    if key == SDS:
        return MethodSpec(key, SDS)
    if key == JSD:
        return MethodSpec(key, JSD)
    if key.startswith(f"{JSD}-"):
        energy = key[len(JSD) + 1:]
        if energy not in ENERGIES:
            raise UnknownMethodException(f"Unknown energy {energy!r} in method {key!r}")
        return MethodSpec(key, JSD, energy=energy)
    if key.startswith(f"{COMBINED}-"):
        parts = key.split('-')
        try:
            lambda_sds, lambda_view = float(parts[1]), float(parts[2])
        except (IndexError, ValueError):
            raise UnknownMethodException(f"Expected combined-<lambda_sds>-<lambda_view>, got {key!r}")
        if len(parts) != 3 or lambda_sds < 0 or lambda_view < 0 or lambda_sds + lambda_view == 0:
            raise UnknownMethodException(f"Invalid combination weights in {key!r}")
        return MethodSpec(key, COMBINED, lambda_sds=lambda_sds, lambda_view=lambda_view)
    raise UnknownMethodException(f"Unknown method {key!r}")


def combined_key(lambda_sds, lambda_view):
    return f"{COMBINED}-{lambda_sds:g}-{lambda_view:g}"


def configure(base, spec, label, energies=None, baseline_checkpoint=None):
    """Derive one run's config from the base `distill` config"""
    energies = energies or {}
    changes = {'label': label, 'method': spec.method}
    if spec.method == JSD and spec.energy:
        energy = {**base.energy, 'name': spec.energy, 'checkpoint': None}
        if spec.energy in LEARNED_ENERGIES:
            energy['checkpoint'] = energies.get(spec.energy, base.energy.get('checkpoint'))
        changes['energy'] = energy
    if spec.method == COMBINED:
        checkpoint = baseline_checkpoint or (base.baseline or {}).get('checkpoint')
        changes['baseline'] = {'lambda_sds': spec.lambda_sds, 'lambda_view': spec.lambda_view,
                               'checkpoint': checkpoint}
    return replace(base, **changes)


def render_error(scene, dataset, label, samples_per_ray=64):
    """
    Mean squared error between the scene rendered at the held-out cameras of
    `label` and the held-out images. Errors are averaged per object instance
    and the closest instance is reported.
    """
    indices = [i for i, record in enumerate(dataset.records) if record.label == label]
    if not indices:
        raise NoHeldOutViewsException(f"No held-out views for label {label!r}")
    size = dataset.image_size
    options = RenderOptions(resolution=(size, size), samples_per_ray=samples_per_ray, training=False)
    per_object = {}
    with torch.no_grad():
        for index in indices:
            record = dataset.records[index]
            image = render(scene, record.camera, options).rgb.to(dataset.images.dtype)
            error = torch.mean((image - dataset.images[index]) ** 2).item()
            per_object.setdefault(record.object_id, []).append(error)
    return min(float(np.mean(errors)) for errors in per_object.values())


@dataclass
class SweepRecord:
    method: str
    label: str
    seed: int
    directory: Path
    janus: bool
    smoothness: Optional[float] = None
    render_error: Optional[float] = None

    def as_row(self):
        return {**asdict(self), 'janus': int(self.janus), 'directory': str(self.directory)}


@dataclass
class MethodSummary:
    janus_rate: float
    mean_smoothness: Optional[float]
    render_error: Optional[float]
    runs: int


def evaluate_run(directory, label, detector=None, window=100, dataset=None):
    """(janus, smoothness, render_error) of one finished run"""
    path = final_scene_path(directory)
    scene, _ = SceneService.load(path)
    janus = detect_janus(scene, detector, str(path)).positive
    try:
        smoothness = loss_smoothness(directory, window).mean
    except ShortSeriesException as exc:
        logger.warning(f"{directory}: no smoothness ({exc.detail})")
        smoothness = None
    error = render_error(scene, dataset, label) if dataset is not None else None
    return janus, smoothness, error


def _mean(values):
    values = [value for value in values if value is not None]
    return float(np.mean(values)) if values else None


def aggregate(records) -> Dict[str, MethodSummary]:
    """Per-method Janus rate, mean smoothness and mean render error"""
    grouped = {}
    for record in records:
        grouped.setdefault(record.method, []).append(record)
    return {
        method: MethodSummary(
            janus_rate=sum(r.janus for r in group) / len(group),
            mean_smoothness=_mean(r.smoothness for r in group),
            render_error=_mean(r.render_error for r in group),
            runs=len(group),
        )
        for method, group in grouped.items()
    }


def smoothness_wins(records, method, reference=SDS, ratio=0.8):
    """
    Fraction of matched (label, seed) pairs where `method`'s smoothness is
    at most `ratio` times the reference's; None without matched pairs.
    """
    by_key = {(r.method, r.label, r.seed): r for r in records if r.smoothness is not None}
    wins, pairs = 0, 0
    for (name, label, seed), record in by_key.items():
        if name != method or (reference, label, seed) not in by_key:
            continue
        pairs += 1
        wins += record.smoothness <= ratio * by_key[(reference, label, seed)].smoothness
    return wins / pairs if pairs else None


def induces_janus(summary, reference=SDS, floor=0.5):
    """The reference method is Janus-prone enough for a comparison to mean anything"""
    return reference in summary and summary[reference].janus_rate >= floor


def janus_direction(summary, reference=SDS, factor=0.5, floor=0.5):
    """
    Per method: rate <= factor * reference rate. Every method fails while the
    reference rate stays below floor.
    """
    if reference not in summary:
        return {}
    held = induces_janus(summary, reference, floor)
    limit = factor * summary[reference].janus_rate
    return {method: held and item.janus_rate <= limit for method, item in summary.items() if method != reference}


@dataclass
class SweepReport:
    records: List[SweepRecord]
    summary: Dict[str, MethodSummary]
    csv_path: Path
    summary_path: Path


def run_sweep(base, methods, labels, seeds, root, detector=None, window=100, dataset=None, energies=None,
              baseline_checkpoint=None, first_seed=0):
    """
    Run every method for every label and seed, then score the runs.

    Args:
        base: RunConfig carrying the shared schedule, scene and prior
        methods: MethodSpec list (see parse_method)
        labels: Conditioning labels
        seeds: Number of seeds, starting at first_seed
        root: Output directory; runs land in root/<method>/<label>/s<seed>
        dataset: Held-out MultiViewDataset for the render error, optional
    """
    if not methods or not labels or seeds < 1:
        raise ContractError('A sweep needs at least one method, label and seed')
    root = Path(root)
    detector = detector or DetectorSettings.from_settings()
    records = []
    for spec, label, seed in product(methods, labels, range(first_seed, first_seed + seeds)):
        config = configure(base, spec, label, energies, baseline_checkpoint)
        directory = root / spec.key / label / f"s{seed}"
        logger.info(f"Sweep run {spec.key} / {label} / seed {seed}")
        run_distillation(config, seed, directory)
        janus, smoothness, error = evaluate_run(directory, label, detector, window, dataset)
        records.append(SweepRecord(spec.key, label, seed, directory, janus, smoothness, error))

    csv_path = write_rows(root / SWEEP_CSV, SWEEP_COLUMNS, [record.as_row() for record in records])
    summary = aggregate(records)
    checks = {
        'sds_induces_janus': induces_janus(summary),
        'janus_direction': janus_direction(summary),
        'smoothness_wins': {spec.key: smoothness_wins(records, spec.key) for spec in methods if spec.key != SDS},
    }
    summary_path = root / SWEEP_SUMMARY
    with open(summary_path, 'w', encoding='utf-8') as handle:
        json.dump({'methods': {key: asdict(value) for key, value in summary.items()}, 'checks': checks},
                  handle, indent=2, sort_keys=True)
    for key, item in summary.items():
        logger.info(f"{key}: janus rate {item.janus_rate:.3f}, smoothness {item.mean_smoothness}, "
                    f"render error {item.render_error}")
    return SweepReport(records, summary, csv_path, summary_path)


@dataclass(frozen=True)
class OperatingPoint:
    janus_rate: float
    render_error: float
    lambda_sds: Optional[float] = None
    lambda_view: Optional[float] = None

    def dominates(self, other):
        """At least as good on both axes and strictly better on one (lower is better)"""
        no_worse = self.janus_rate <= other.janus_rate and self.render_error <= other.render_error
        better = self.janus_rate < other.janus_rate or self.render_error < other.render_error
        return no_worse and better

    def matches(self, reference):
        """Achieves the reference's Janus rate and render error simultaneously"""
        return self.janus_rate <= reference.janus_rate and self.render_error <= reference.render_error


def grid_weights(lambdas=DEFAULT_LAMBDAS):
    """Every (lambda_sds, lambda_view) pair except (0, 0)"""
    return [(a, b) for a, b in product(lambdas, lambdas) if a > 0 or b > 0]


def pareto_front(points):
    return [p for p in points if not any(q.dominates(p) for q in points if q is not p)]


@dataclass
class DominanceReport:
    matched_by: List[OperatingPoint]
    ties_or_dominates: bool

    @property
    def unmatched(self):
        return not self.matched_by


def dominance_check(reference, points):
    """
    Grid points matching the reference on both axes, and whether the
    reference ties or beats every point on at least one axis.
    """
    matched = [p for p in points if p.matches(reference)]
    ties = all(reference.janus_rate <= p.janus_rate or reference.render_error <= p.render_error for p in points)
    return DominanceReport(matched, ties)


@dataclass
class GridReport:
    reference: OperatingPoint
    points: List[OperatingPoint]
    front: List[OperatingPoint]
    dominance: DominanceReport
    csv_path: Path


def run_baseline_grid(base, labels, seeds, root, dataset, lambdas=DEFAULT_LAMBDAS, reference='jsd-cls',
                      detector=None, window=100, energies=None, baseline_checkpoint=None, first_seed=0):
    """
    Sweep the naive combination over the lambda grid next to a JSD reference
    and write the Pareto table.
    """
    if dataset is None:
        raise ContractError('The baseline grid needs held-out data for the render error')
    reference_spec = parse_method(reference)
    if reference_spec.method != JSD:
        raise UnknownMethodException(f"The grid reference must be a JSD method, got {reference!r}")
    weights = grid_weights(lambdas)
    methods = [reference_spec] + [MethodSpec(combined_key(a, b), COMBINED, lambda_sds=a, lambda_view=b)
                                  for a, b in weights]
    report = run_sweep(base, methods, labels, seeds, root, detector, window, dataset, energies,
                       baseline_checkpoint, first_seed)

    summary = report.summary
    anchor = OperatingPoint(summary[reference].janus_rate, summary[reference].render_error)
    points = [OperatingPoint(summary[combined_key(a, b)].janus_rate, summary[combined_key(a, b)].render_error, a, b)
              for a, b in weights]
    front = pareto_front(points)
    dominance = dominance_check(anchor, points)

    rows = [{
        'lambda_sds': p.lambda_sds,
        'lambda_view': p.lambda_view,
        'janus_rate': p.janus_rate,
        'render_error': p.render_error,
        'pareto': int(p in front),
        'matches_reference': int(p.matches(anchor)),
    } for p in points]
    csv_path = write_rows(Path(root) / GRID_CSV, GRID_COLUMNS, rows)
    with open(Path(root) / GRID_SUMMARY, 'w', encoding='utf-8') as handle:
        json.dump({
            'reference': {'method': reference, **asdict(anchor)},
            'pareto_front': [asdict(p) for p in front],
            'matched_by': [asdict(p) for p in dominance.matched_by],
            'ties_or_dominates': dominance.ties_or_dominates,
        }, handle, indent=2, sort_keys=True)
    logger.info(f"Baseline grid: {len(dominance.matched_by)} of {len(points)} points match {reference}")
    return GridReport(anchor, points, front, dominance, csv_path)
