from core.management.base import LabCommand, resolve_output, validate_section
from core.utils.csvlog import write_rows
from core.utils.decorators import log_duration
from apps.scene.datasets import MultiViewDataset
from apps.energy.serializers import ClassifierSectionSerializer
from apps.energy.services import CLASSIFIER_COLUMNS, ClassifierService


class Command(LabCommand):
    help = 'Train the pair classifier behind the cls energy'

    def add_stage_arguments(self, parser):
        parser.add_argument('--data', default=None, help='Dataset directory (overrides classifier.dataset)')

    @log_duration('train-classifier')
    def run(self, config, seed, options):
        section = validate_section(ClassifierSectionSerializer, config, 'classifier')
        dataset = MultiViewDataset.load(resolve_output(options.get('data') or section['dataset']))
        result = ClassifierService.train_classifier(dataset, section['config'], seed)

        checkpoint = self.output_path(options, section['checkpoint'])
        ClassifierService.save(result.model, checkpoint, section['config'])
        write_rows(checkpoint.with_name(f"{checkpoint.stem}_loss.csv"), CLASSIFIER_COLUMNS, result.history)
        return (f"Validation accuracy {result.metrics['initial_accuracy']:.3f} -> "
                f"{result.metrics['held_out_accuracy']:.3f}; saved {checkpoint}")
