from .base import *

DEBUG = True

LAB = {**LAB, 'OUTPUT_ROOT': '', 'DEVICE': 'cpu', 'DEFAULT_SEED': 0}

# Keep test output quiet
LOGGING['root']['level'] = 'WARNING'
LOGGING['loggers']['apps']['level'] = 'WARNING'
LOGGING['loggers']['core']['level'] = 'WARNING'
