import json

from core.management.base import LabCommand, resolve_output
from apps.harness.metrics import loss_smoothness


class Command(LabCommand):
    help = 'Post-warmup rolling standard deviation of distillation losses'

    config_required = False

    def add_stage_arguments(self, parser):
        parser.add_argument('--csv', nargs='+', required=True, help='Step logs or run directories')
        parser.add_argument('--window', type=int, default=None, help='Rolling window (default sweep.window or 100)')

    def run(self, config, seed, options):
        window = options.get('window') or config.get('sweep', {}).get('window', 100)
        results = {}
        lines = []
        for path in options['csv']:
            summary = loss_smoothness(resolve_output(path), window)
            results[path] = summary.as_dict()
            lines.append(f"{path}: mean rolling std {summary.mean:.6f}, max {summary.max:.6f} "
                         f"over {summary.rows_used} rows")
        if options.get('out'):
            out = self.output_path(options, options['out'])
            out.parent.mkdir(parents=True, exist_ok=True)
            with open(out, 'w', encoding='utf-8') as handle:
                json.dump({'window': window, 'runs': results}, handle, indent=2)
        return '\n'.join(lines)
