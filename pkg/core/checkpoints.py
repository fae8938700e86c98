"""
Versioned single-file checkpoints shared by every trained artifact.

A checkpoint is a torch-serialised dict:
    {'schema_version', 'kind', 'metadata', 'state_dict'}
where metadata holds only plain Python values.
"""
import logging
from pathlib import Path

import torch

from core.exceptions import CheckpointError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class CheckpointService:
    """Service for saving and loading lab checkpoints"""

    @staticmethod
    def save(path, kind, state_dict, metadata=None):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            'schema_version': SCHEMA_VERSION,
            'kind': kind,
            'metadata': metadata or {},
            'state_dict': {name: tensor.detach().cpu() for name, tensor in state_dict.items()},
        }
        torch.save(payload, path)
        logger.info(f"Saved {kind} checkpoint to {path}")
        return path

    @staticmethod
    def load(path, kind):
        """
        Load a checkpoint and check its kind and schema version.

        Returns (state_dict, metadata).
        """
        path = Path(path)
        if not path.is_file():
            raise CheckpointError(f"Checkpoint not found: {path}")

        try:
            payload = torch.load(path, map_location='cpu', weights_only=True)
        except Exception as exc:
            raise CheckpointError(f"Unreadable checkpoint {path}: {exc}") from exc

        if not isinstance(payload, dict) or 'state_dict' not in payload:
            raise CheckpointError(f"Malformed checkpoint: {path}")
        if payload.get('schema_version') != SCHEMA_VERSION:
            raise CheckpointError(
                f"Checkpoint {path} has schema version {payload.get('schema_version')}, "
                f"expected {SCHEMA_VERSION}"
            )
        if payload.get('kind') != kind:
            raise CheckpointError(f"Checkpoint {path} holds a '{payload.get('kind')}', expected '{kind}'")

        return payload['state_dict'], payload.get('metadata', {})

    @staticmethod
    def require(paths):
        """Fail fast when any referenced checkpoint is missing"""
        missing = [str(p) for p in paths if p and not Path(p).is_file()]
        if missing:
            raise CheckpointError(f"Missing checkpoints: {', '.join(missing)}")
