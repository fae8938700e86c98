import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

SECRET_KEY = os.getenv('SECRET_KEY', 'django-insecure-lab-key')

DEBUG = False
ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',

    # Third party apps
    'rest_framework',

    # Local apps
    'core',
    'apps.schedules',
    'apps.diffusion',
    'apps.scene',
    'apps.energy',
    'apps.distillation',
    'apps.harness',
]

# The lab keeps no relational state; everything persists as files.
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': ':memory:',
    }
}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Django REST Framework (serializers validate run configuration sections)
REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': (
        'rest_framework.renderers.JSONRenderer',
    ),
    'UNAUTHENTICATED_USER': None,
}

# Lab settings
LAB = {
    'OUTPUT_ROOT': os.getenv('JSD_OUTPUT_ROOT', ''),
    'DEVICE': os.getenv('JSD_DEVICE', 'cpu'),
    'DEFAULT_SEED': int(os.getenv('JSD_DEFAULT_SEED', '0')),
    'RENDER': {
        'SAMPLES_PER_RAY': 64,
        'RADIUS': 3.0,
    },
    'JANUS': {
        'FRAMES': 36,
        'ELEVATION': 15.0,
        'RESOLUTION': 64,
        'MIN_MARKER_PIXELS': 6,
        'RELATIVE_THRESHOLD': 0.3,
    },
}

LOG_LEVEL = os.getenv('JSD_LOG_LEVEL', 'INFO')

# Logging
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {name} {message}',
            'style': '{',
        },
        'json': {
            '()': 'pythonjsonlogger.jsonlogger.JsonFormatter',
            'format': '%(asctime)s %(name)s %(levelname)s %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': LOG_LEVEL,
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'WARNING',
            'propagate': False,
        },
        'apps': {
            'level': LOG_LEVEL,
            'propagate': True,
        },
        'core': {
            'level': LOG_LEVEL,
            'propagate': True,
        },
    },
}
