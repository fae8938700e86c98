from core.management.base import LabCommand, resolve_output, validate_section
from core.utils.csvlog import write_rows
from core.utils.decorators import log_duration
from apps.scene.datasets import MultiViewDataset
from apps.energy.serializers import SynthSectionSerializer
from apps.energy.services import LOSS_COLUMNS, SynthService


class Command(LabCommand):
    help = 'Train the multi-view synthesis model behind the mvs energy'

    def add_stage_arguments(self, parser):
        parser.add_argument('--data', default=None, help='Dataset directory (overrides mvs.dataset)')

    @log_duration('train-mvs')
    def run(self, config, seed, options):
        section = validate_section(SynthSectionSerializer, config, 'mvs')
        dataset = MultiViewDataset.load(resolve_output(options.get('data') or section['dataset']))
        result = SynthService.train_mvs_model(dataset, section['config'], seed)

        checkpoint = self.output_path(options, section['checkpoint'])
        SynthService.save(result.model, checkpoint, section['config'])
        write_rows(checkpoint.with_name(f"{checkpoint.stem}_loss.csv"), LOSS_COLUMNS, result.history)
        return (f"Held-out error {result.metrics['held_out_error']:.4f} "
                f"(label mean {result.metrics['label_mean_error']:.4f}); saved {checkpoint}")
