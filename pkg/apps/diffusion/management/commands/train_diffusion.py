from core.management.base import LabCommand, resolve_output, validate_section
from core.utils.csvlog import write_rows
from core.utils.decorators import log_duration
from apps.scene.datasets import MultiViewDataset
from apps.diffusion.serializers import DiffusionTrainingSerializer
from apps.diffusion.services import DenoiserService, LOSS_COLUMNS


class Command(LabCommand):
    help = 'Train the toy conditional denoiser and write its checkpoint and loss log'

    def add_stage_arguments(self, parser):
        parser.add_argument('--data', default=None, help='Dataset directory (overrides diffusion.dataset)')

    @log_duration('train-diffusion')
    def run(self, config, seed, options):
        section = validate_section(DiffusionTrainingSerializer, config, 'diffusion')
        dataset = MultiViewDataset.load(resolve_output(options.get('data') or section['dataset']))
        result = DenoiserService.train_toy_diffusion(dataset, section['config'], seed, section['schedule'])

        checkpoint = self.output_path(options, section['checkpoint'])
        DenoiserService.save(result.model, checkpoint, section['schedule'], section['config'])
        write_rows(checkpoint.with_name(f"{checkpoint.stem}_loss.csv"), LOSS_COLUMNS, result.history)
        write_rows(
            checkpoint.with_name(f"{checkpoint.stem}_buckets.csv"),
            ('bucket', 'held_out_loss'),
            [{'bucket': bucket, 'held_out_loss': loss} for bucket, loss in result.bucket_losses.items()],
        )
        return (f"Trained for {result.steps} steps; held-out loss "
                f"{result.initial_held_out_loss:.4f} -> {result.final_held_out_loss:.4f}; saved {checkpoint}")
