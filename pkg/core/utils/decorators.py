import logging
import time
from functools import wraps


def log_duration(label=None):
    """
    Decorator logging how long a pipeline stage took
    """
    def decorator(func):
        logger = logging.getLogger(func.__module__)
        name = label or func.__name__

        @wraps(func)
        def _wrapped(*args, **kwargs):
            started = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                logger.info(f"{name} finished in {time.perf_counter() - started:.2f}s")
        return _wrapped
    return decorator
