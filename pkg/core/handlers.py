"""
Error handling for management commands - ensures every lab failure surfaces
as a single-line CommandError in a consistent format
"""
import logging
from functools import wraps

from django.core.management.base import CommandError
from rest_framework.exceptions import ValidationError

from core.exceptions import LabException

logger = logging.getLogger(__name__)


def _flatten_validation(detail, prefix=''):
    """Flatten nested DRF error details into 'section.field: message' strings"""
    if isinstance(detail, dict):
        messages = []
        for key, value in detail.items():
            path = f"{prefix}.{key}" if prefix else str(key)
            messages.extend(_flatten_validation(value, path))
        return messages
    if isinstance(detail, list):
        messages = []
        for item in detail:
            messages.extend(_flatten_validation(item, prefix))
        return messages
    return [f"{prefix}: {detail}" if prefix else str(detail)]


def command_exception_handler(exc):
    """
    Convert a raised exception into the CommandError shown to the user.

    Returns None for exceptions the lab does not own, so callers re-raise them.
    """
    if isinstance(exc, LabException):
        return CommandError(f"[{exc.code}] {exc.detail}")

    if isinstance(exc, ValidationError):
        messages = _flatten_validation(exc.detail)
        return CommandError(f"[config_error] {'; '.join(messages)}")

    return None


def handle_lab_errors(func):
    """Decorator for BaseCommand.handle routing lab failures through the handler"""
    @wraps(func)
    def _wrapped(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except CommandError:
            raise
        except Exception as exc:
            error = command_exception_handler(exc)
            if error is None:
                logger.error(f"Unhandled exception: {exc}", exc_info=True)
                raise
            logger.error(f"Command failed: {error}")
            raise error from exc
    return _wrapped
