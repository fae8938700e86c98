from .base import *

DEBUG = True

LOGGING['root']['level'] = os.getenv('JSD_LOG_LEVEL', 'DEBUG')
