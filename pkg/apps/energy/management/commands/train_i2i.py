from core.management.base import LabCommand, resolve_output, validate_section
from core.utils.csvlog import write_rows
from core.utils.decorators import log_duration
from apps.scene.datasets import MultiViewDataset
from apps.energy.serializers import TranslatorSectionSerializer
from apps.energy.services import LOSS_COLUMNS, TranslatorService


class Command(LabCommand):
    help = 'Train the view translator behind the i2i energy'

    def add_stage_arguments(self, parser):
        parser.add_argument('--data', default=None, help='Dataset directory (overrides translator.dataset)')

    @log_duration('train-i2i')
    def run(self, config, seed, options):
        section = validate_section(TranslatorSectionSerializer, config, 'translator')
        dataset = MultiViewDataset.load(resolve_output(options.get('data') or section['dataset']))
        result = TranslatorService.train_view_translator(dataset, section['config'], seed)

        checkpoint = self.output_path(options, section['checkpoint'])
        TranslatorService.save(result.model, checkpoint, section['config'])
        write_rows(checkpoint.with_name(f"{checkpoint.stem}_loss.csv"), LOSS_COLUMNS, result.history)
        return (f"Held-out error {result.metrics['held_out_error']:.4f} "
                f"(identity copy {result.metrics['identity_copy_error']:.4f}); saved {checkpoint}")
