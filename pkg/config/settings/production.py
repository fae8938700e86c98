from .base import *
from pathlib import Path

DEBUG = False

# Structured logs for batch sweeps
LOGGING['handlers']['console']['formatter'] = 'json'

LOG_DIR = os.getenv('JSD_LOG_DIR', '')
if LOG_DIR:
    Path(LOG_DIR).mkdir(parents=True, exist_ok=True)
    LOGGING['handlers']['file'] = {
        'class': 'logging.handlers.RotatingFileHandler',
        'filename': str(Path(LOG_DIR) / 'lab.log'),
        'maxBytes': 100 * 1024 * 1024,  # 100MB
        'backupCount': 10,
        'formatter': 'json',
    }
    LOGGING['root']['handlers'] = ['console', 'file']
