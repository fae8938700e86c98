from core.management.base import LabCommand, validate_section
from core.utils.decorators import log_duration
from apps.scene.datasets import MultiViewDataset
from apps.harness.experiments import run_baseline_grid, run_sweep
from apps.harness.runs import JSD
from apps.harness.serializers import DetectorSettingsSerializer, RunConfigSerializer, SweepSerializer


class Command(LabCommand):
    help = 'Run methods x labels x seeds and report Janus rate, smoothness and held-out render error'

    def add_stage_arguments(self, parser):
        parser.add_argument('--grid', action='store_true',
                            help='Sweep the (lambda_sds, lambda_view) grid of the naive combination instead')
        parser.add_argument('--reference', default=None, help='JSD method the grid is compared with')
        parser.add_argument('--seeds', type=int, default=None, help='Override sweep.seeds')
        parser.add_argument('--labels', nargs='+', default=None, help='Override sweep.labels')

    @log_duration('sweep')
    def run(self, config, seed, options):
        section = dict(config.get('sweep', {}))
        if options.get('seeds'):
            section['seeds'] = options['seeds']
        if options.get('labels'):
            section['labels'] = options['labels']
        sweep = validate_section(SweepSerializer, {'sweep': section}, 'sweep')

        distill = dict(config.get('distill', {}))
        distill.setdefault('label', sweep['labels'][0])
        base = validate_section(RunConfigSerializer, {'distill': distill}, 'distill')
        janus = dict(config.get('janus', {}))
        janus.pop('runs', None)
        detector = validate_section(DetectorSettingsSerializer, {'janus': janus}, 'janus')['detector']
        dataset = MultiViewDataset.load(sweep['dataset']) if sweep.get('dataset') else None
        root = self.output_path(options, sweep['output'])

        if options.get('grid'):
            reference = options.get('reference') or next(
                (spec.key for spec in sweep['methods'] if spec.method == JSD), 'jsd-cls')
            report = run_baseline_grid(base, sweep['labels'], sweep['seeds'], root, dataset, sweep['lambdas'],
                                       reference, detector, sweep['window'], sweep['energies'],
                                       sweep['baseline_checkpoint'], first_seed=seed)
            return (f"{len(report.dominance.matched_by)} of {len(report.points)} grid points match {reference}; "
                    f"{len(report.front)} on the Pareto front; table at {report.csv_path}")

        report = run_sweep(base, sweep['methods'], sweep['labels'], sweep['seeds'], root, detector,
                           sweep['window'], dataset, sweep['energies'], sweep['baseline_checkpoint'],
                           first_seed=seed)
        lines = [f"{key}: janus rate {item.janus_rate:.3f}, smoothness {item.mean_smoothness}, "
                 f"render error {item.render_error} ({item.runs} runs)"
                 for key, item in report.summary.items()]
        return '\n'.join(lines + [f"Records at {report.csv_path}"])
