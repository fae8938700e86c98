import json

from core.exceptions import ConfigError
from core.management.base import LabCommand, resolve_output, validate_section
from apps.harness.metrics import janus_rate
from apps.harness.serializers import DetectorSettingsSerializer


class Command(LabCommand):
    help = 'Janus rate of finished runs by the turntable marker detector'

    config_required = False

    def add_stage_arguments(self, parser):
        parser.add_argument('--runs', nargs='+', default=None, help='Run directories or scene checkpoints')
        parser.add_argument('--frames', type=int, default=None, help='Override janus.frames')

    def run(self, config, seed, options):
        section = dict(config.get('janus', {}))
        if options.get('runs'):
            section['runs'] = options['runs']
        if options.get('frames'):
            section['frames'] = options['frames']
        janus = validate_section(DetectorSettingsSerializer, {'janus': section}, 'janus')
        if not janus['runs']:
            raise ConfigError('No runs given (--runs or janus.runs)')

        report = janus_rate([resolve_output(run) for run in janus['runs']], janus['detector'])
        if options.get('out'):
            out = self.output_path(options, options['out'])
            out.parent.mkdir(parents=True, exist_ok=True)
            with open(out, 'w', encoding='utf-8') as handle:
                json.dump(report.as_dict(), handle, indent=2)
        positives = sum(run.positive for run in report.runs)
        return f"Janus rate {report.rate:.3f} ({positives} of {len(report.runs)} runs)"
