from core.management.base import LabCommand, validate_section
from core.utils.decorators import log_duration
from apps.scene.datasets import generate_dataset
from apps.scene.serializers import DatasetConfigSerializer, PRESETS


class Command(LabCommand):
    help = 'Render the procedural multi-view dataset (PNG views plus manifest.csv)'

    def add_stage_arguments(self, parser):
        parser.add_argument('--preset', choices=list(PRESETS), default=None,
                            help='Override the view-bucket distribution')

    @log_duration('gen-data')
    def run(self, config, seed, options):
        section = dict(config.get('data', {}))
        if options.get('preset'):
            section['preset'] = options['preset']
            section.pop('bucket_weights', None)
        dataset_config = validate_section(DatasetConfigSerializer, {'data': section}, 'data')
        dataset = generate_dataset(dataset_config, seed)
        out = self.output_path(options, f"data/{section.get('preset', 'front_biased')}")
        dataset.save(out)
        return f"Wrote {len(dataset)} views to {out}"
