"""
Base class for the lab's pipeline-stage commands.

Every stage reads one JSON run configuration (`--config`), validates the
sections it needs with DRF serializers and accepts `--seed` / `--out`
overrides.
"""
import json
import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand

from core.exceptions import ConfigError
from core.handlers import handle_lab_errors

logger = logging.getLogger(__name__)


def load_config(path):
    """Read a JSON run configuration into a dict of sections"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path, encoding='utf-8') as handle:
            data = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError('Config file must hold an object of named sections')
    return data


def resolve_output(path):
    """Re-root a relative output path under JSD_OUTPUT_ROOT when it is set"""
    path = Path(path)
    root = settings.LAB.get('OUTPUT_ROOT')
    if root and not path.is_absolute():
        return Path(root) / path
    return path


def validate_section(serializer_class, data, section):
    """Validate one config section and return the object its serializer builds"""
    serializer = serializer_class(data=data.get(section, {}))
    serializer.is_valid(raise_exception=True)
    return serializer.save()


class LabCommand(BaseCommand):
    """Command with --config/--seed/--out and uniform error reporting"""

    config_required = True

    def add_arguments(self, parser):
        parser.add_argument('--config', required=self.config_required, help='JSON run configuration')
        parser.add_argument('--seed', type=int, default=None, help='Override the configured seed')
        parser.add_argument('--out', default=None, help='Override the output location')
        self.add_stage_arguments(parser)

    def add_stage_arguments(self, parser):
        """Hook for per-stage extra arguments"""

    @handle_lab_errors
    def handle(self, *args, **options):
        config = load_config(options['config']) if options.get('config') else {}
        seed = options['seed']
        if seed is None:
            seed = config.get('seed', settings.LAB['DEFAULT_SEED'])
        if seed < 0:
            raise ConfigError('seed must be non-negative')
        logger.info(f"Running {self.__module__.rsplit('.', 1)[-1]} with seed {seed}")
        result = self.run(config, seed, options)
        if result:
            self.stdout.write(self.style.SUCCESS(str(result)))

    def output_path(self, options, default):
        return resolve_output(options.get('out') or default)

    def run(self, config, seed, options):
        raise NotImplementedError
