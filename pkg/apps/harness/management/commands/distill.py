from core.management.base import LabCommand, validate_section
from apps.harness.runs import METHODS, run_distillation
from apps.harness.serializers import RunConfigSerializer


class Command(LabCommand):
    help = 'Distil a voxel scene for one label (SDS warmup, then sds, jsd or combined)'

    def add_stage_arguments(self, parser):
        parser.add_argument('--method', choices=METHODS, default=None, help='Override distill.method')
        parser.add_argument('--label', default=None, help='Override distill.label')

    def run(self, config, seed, options):
        section = dict(config.get('distill', {}))
        for key in ('method', 'label'):
            if options.get(key):
                section[key] = options[key]
        run_config = validate_section(RunConfigSerializer, {'distill': section}, 'distill')
        out = self.output_path(options, f"runs/{run_config.method}_{run_config.label}_s{seed}")
        artifacts = run_distillation(run_config, seed, out)
        return f"{artifacts.rows} steps logged; final scene {artifacts.final_scene}"
