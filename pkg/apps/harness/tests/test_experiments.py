import json
from pathlib import Path

import pytest
from django.conf import settings as django_settings

from core.exceptions import ContractError
from core.management.base import load_config, validate_section
from core.utils.csvlog import read_rows
from apps.scene.assets import DEFAULT_CLASSES, build_asset
from apps.scene.datasets import BALANCED, FRONT_BIASED, DatasetConfig, generate_dataset
from apps.scene.tests.factories import DatasetConfigFactory
from apps.diffusion.services import DenoiserService
from apps.energy.services import ClassifierService, SynthService, TranslatorService
from apps.energy.tests.factories import MultiViewSynthFactory
from apps.harness.exceptions import NoHeldOutViewsException, UnknownMethodException
from apps.harness.experiments import (
    GRID_CSV,
    SWEEP_CSV,
    SWEEP_SUMMARY,
    OperatingPoint,
    SweepRecord,
    MethodSummary,
    aggregate,
    configure,
    dominance_check,
    grid_weights,
    induces_janus,
    janus_direction,
    pareto_front,
    parse_method,
    render_error,
    run_baseline_grid,
    run_sweep,
    smoothness_wins,
)
from apps.harness.metrics import DetectorSettings
from apps.harness.runs import COMBINED, JSD, SDS
from apps.harness.serializers import RunConfigSerializer, SweepSerializer
from .factories import DetectorSettingsFactory, RunConfigFactory, tiny_schedule


@pytest.fixture(scope='module')
def held_out():
    return generate_dataset(DatasetConfigFactory(objects_per_class=1, views_per_object=2), seed=7)


def record(method, label, seed, janus=False, smoothness=None, error=None):
    return SweepRecord(method, label, seed, Path('unused'), janus, smoothness, error)


def small_detector():
    return DetectorSettingsFactory(frames=8, resolution=16, samples_per_ray=16)


class TestParseMethod:
    def test_sds(self):
        assert parse_method('sds').method == SDS

    def test_jsd_energy(self):
        spec = parse_method('jsd-cls')
        assert (spec.method, spec.energy) == (JSD, 'cls')

    def test_combined_weights(self):
        spec = parse_method('combined-0.25-1')
        assert (spec.method, spec.lambda_sds, spec.lambda_view) == (COMBINED, 0.25, 1.0)

    @pytest.mark.parametrize('key', ['sjc', 'jsd-clip', 'combined-1', 'combined-0-0', 'combined-a-b',
                                     'combined-1-1-1'])
    def test_rejected(self, key):
        with pytest.raises(UnknownMethodException):
            parse_method(key)


class TestConfigure:
    def test_learned_energy_checkpoint(self):
        config = configure(RunConfigFactory(), parse_method('jsd-i2i'), 'crate', {'i2i': 'i2i.pt'})
        assert config.label == 'crate'
        assert config.energy['name'] == 'i2i'
        assert config.energy['checkpoint'] == 'i2i.pt'

    def test_analytic_energy_drops_checkpoint(self):
        base = RunConfigFactory(energy={'name': 'cls', 'checkpoint': 'cls.pt'})
        assert configure(base, parse_method('jsd-quadratic'), 'orb').energy['checkpoint'] is None

    def test_combined_baseline(self):
        spec = parse_method('combined-0.5-0.75')
        config = configure(RunConfigFactory(), spec, 'orb', baseline_checkpoint='mvs.pt')
        assert config.method == COMBINED
        assert config.baseline == {'lambda_sds': 0.5, 'lambda_view': 0.75, 'checkpoint': 'mvs.pt'}


class TestAggregation:
    RECORDS = [
        record('sds', 'orb', 0, True, 0.4, 0.10),
        record('sds', 'orb', 1, True, 0.5, 0.20),
        record('jsd-cls', 'orb', 0, False, 0.2, 0.05),
        record('jsd-cls', 'orb', 1, True, 0.45, None),
    ]

    def test_summary(self):
        summary = aggregate(self.RECORDS)
        assert summary['sds'].janus_rate == 1.0
        assert summary['jsd-cls'].janus_rate == 0.5
        assert summary['sds'].mean_smoothness == pytest.approx(0.45)
        assert summary['jsd-cls'].render_error == pytest.approx(0.05)
        assert summary['jsd-cls'].runs == 2

    def test_smoothness_wins(self):
        assert smoothness_wins(self.RECORDS, 'jsd-cls') == 0.5
        assert smoothness_wins(self.RECORDS, 'jsd-mvs') is None

    def test_janus_direction(self):
        assert janus_direction(aggregate(self.RECORDS)) == {'jsd-cls': True}

    def test_janus_direction_needs_janus_prone_reference(self):
        summary = {
            'sds': MethodSummary(0.0, None, None, 8),
            'jsd-cls': MethodSummary(0.0, None, None, 8),
        }
        assert induces_janus(summary) is False
        assert janus_direction(summary) == {'jsd-cls': False}

    def test_janus_direction_at_floor(self):
        summary = {
            'sds': MethodSummary(0.5, None, None, 8),
            'jsd-cls': MethodSummary(0.25, None, None, 8),
            'jsd-mvs': MethodSummary(0.375, None, None, 8),
        }
        assert induces_janus(summary) is True
        assert janus_direction(summary) == {'jsd-cls': True, 'jsd-mvs': False}

    def test_janus_direction_without_reference(self):
        assert janus_direction({'jsd-cls': MethodSummary(0.0, None, None, 8)}) == {}
        assert induces_janus({}) is False


class TestParetoAnalysis:
    def test_grid_weights_skip_origin(self):
        weights = grid_weights()
        assert len(weights) == 24
        assert (0.0, 0.0) not in weights

    def test_dominates(self):
        assert OperatingPoint(0.1, 0.2).dominates(OperatingPoint(0.1, 0.3))
        assert not OperatingPoint(0.1, 0.2).dominates(OperatingPoint(0.1, 0.2))
        assert not OperatingPoint(0.0, 0.5).dominates(OperatingPoint(0.5, 0.0))

    def test_front(self):
        points = [OperatingPoint(0.0, 0.9), OperatingPoint(0.5, 0.5), OperatingPoint(0.9, 0.0),
                  OperatingPoint(0.6, 0.6)]
        assert pareto_front(points) == points[:3]

    def test_reference_unmatched(self):
        reference = OperatingPoint(0.1, 0.1)
        report = dominance_check(reference, [OperatingPoint(0.0, 0.5), OperatingPoint(0.5, 0.05)])
        assert report.unmatched
        assert report.ties_or_dominates

    def test_reference_matched(self):
        reference = OperatingPoint(0.2, 0.2)
        point = OperatingPoint(0.1, 0.15, 0.5, 0.5)
        report = dominance_check(reference, [point])
        assert report.matched_by == [point]
        assert not report.ties_or_dominates


class TestRenderError:
    def test_true_asset_beats_blank_scene(self, held_out):
        asset = build_asset(DEFAULT_CLASSES[0], grid_size=16)
        blank = RunConfigFactory().scene.build()
        assert render_error(asset, held_out, 'orb', 32) < render_error(blank, held_out, 'orb', 32)

    def test_unknown_label(self, held_out):
        with pytest.raises(NoHeldOutViewsException):
            render_error(build_asset(DEFAULT_CLASSES[0], grid_size=16), held_out, 'pebble')


class TestRunSweep:
    def test_small_sweep(self, tmp_path, held_out):
        base = RunConfigFactory(schedule=tiny_schedule(4, warmup_fraction=0.25))
        methods = [parse_method('sds'), parse_method('jsd-quadratic')]
        report = run_sweep(base, methods, ['orb'], 1, tmp_path, small_detector(), window=2, dataset=held_out)

        rows = read_rows(tmp_path / SWEEP_CSV)
        assert [row['method'] for row in rows] == ['sds', 'jsd-quadratic']
        for method in ('sds', 'jsd-quadratic'):
            assert (tmp_path / method / 'orb' / 's0' / 'steps.csv').is_file()
        assert set(report.summary) == {'sds', 'jsd-quadratic'}
        assert all(item.render_error is not None for item in report.summary.values())
        summary = json.loads((tmp_path / SWEEP_SUMMARY).read_text())
        assert set(summary['checks']['smoothness_wins']) == {'jsd-quadratic'}
        assert isinstance(summary['checks']['sds_induces_janus'], bool)

    def test_needs_methods(self, tmp_path):
        with pytest.raises(ContractError):
            run_sweep(RunConfigFactory(), [], ['orb'], 1, tmp_path)


class TestBaselineGrid:
    def test_small_grid(self, tmp_path, held_out):
        checkpoint = SynthService.save(MultiViewSynthFactory(), tmp_path / 'mvs.pt')
        base = RunConfigFactory(schedule=tiny_schedule(3, warmup_fraction=0.0))
        report = run_baseline_grid(base, ['orb'], 1, tmp_path / 'grid', held_out, lambdas=(0.0, 1.0),
                                   reference='jsd-quadratic', detector=small_detector(), window=2,
                                   baseline_checkpoint=str(checkpoint))
        rows = read_rows(tmp_path / 'grid' / GRID_CSV)
        assert [(float(r['lambda_sds']), float(r['lambda_view'])) for r in rows] == [(0.0, 1.0), (1.0, 0.0),
                                                                                     (1.0, 1.0)]
        assert len(report.points) == 3
        assert report.front
        assert all(point in report.points for point in report.front)

    def test_needs_held_out_data(self, tmp_path):
        with pytest.raises(ContractError):
            run_baseline_grid(RunConfigFactory(), ['orb'], 1, tmp_path, None)

    def test_reference_must_be_jsd(self, tmp_path, held_out):
        with pytest.raises(UnknownMethodException):
            run_baseline_grid(RunConfigFactory(), ['orb'], 1, tmp_path, held_out, reference='sds')


@pytest.mark.slow
class TestDeskExperiments:
    """Front-biased prior, trained energies and the full method sweep; hours on a CPU"""

    @pytest.fixture(scope='class')
    def lab(self, tmp_path_factory):
        root = tmp_path_factory.mktemp('desk')
        desk = load_config(Path(django_settings.BASE_DIR) / 'configs' / 'desk.json')
        front = generate_dataset(DatasetConfig(bucket_weights=dict(FRONT_BIASED)), seed=0)
        balanced = generate_dataset(DatasetConfig(bucket_weights=dict(BALANCED)), seed=1)
        held = generate_dataset(DatasetConfig(objects_per_class=1, bucket_weights=dict(BALANCED)), seed=2)

        prior = DenoiserService.save(DenoiserService.train_toy_diffusion(front, seed=0).model, root / 'denoiser.pt')
        energies = {
            'cls': str(ClassifierService.save(ClassifierService.train_classifier(balanced, seed=0).model,
                                              root / 'classifier.pt')),
            'i2i': str(TranslatorService.save(TranslatorService.train_view_translator(balanced, seed=0).model,
                                              root / 'translator.pt')),
            'mvs': str(SynthService.save(SynthService.train_mvs_model(balanced, seed=0).model, root / 'mvs.pt')),
        }
        distill = {**desk['distill'], 'prior': {**desk['distill']['prior'], 'checkpoint': str(prior)}}
        base = validate_section(RunConfigSerializer, {'distill': distill}, 'distill')
        sweep = validate_section(SweepSerializer, desk, 'sweep')
        return root, base, sweep, energies, held

    def test_method_sweep(self, lab):
        root, base, sweep, energies, held = lab
        report = run_sweep(base, sweep['methods'], sweep['labels'], sweep['seeds'], root / 'sweep',
                           DetectorSettings.from_settings(), sweep['window'], held, energies)
        assert set(report.summary) == {spec.key for spec in sweep['methods']}
        assert all(0.0 <= item.janus_rate <= 1.0 for item in report.summary.values())
        checks = json.loads(report.summary_path.read_text())['checks']
        jsd_methods = {'jsd-cls', 'jsd-i2i', 'jsd-mvs'}
        assert set(checks['janus_direction']) == jsd_methods
        assert checks['sds_induces_janus'] is True
        assert all(checks['janus_direction'].values()), checks['janus_direction']
        wins = checks['smoothness_wins']
        assert jsd_methods <= set(wins)
        assert all(wins[method] is not None and wins[method] > 0.5 for method in jsd_methods), wins

    def test_baseline_grid(self, lab):
        root, base, sweep, energies, held = lab
        report = run_baseline_grid(base, sweep['labels'], sweep['seeds'], root / 'grid', held, sweep['lambdas'],
                                   reference='jsd-cls', window=sweep['window'], energies=energies,
                                   baseline_checkpoint=energies['mvs'])
        assert len(report.points) == 24
        assert report.front
        assert report.dominance.matched_by == []
        assert report.dominance.ties_or_dominates is True
