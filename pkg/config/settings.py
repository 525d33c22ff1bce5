"""
Django settings for the androscan project.
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Django insists on a key even though nothing is signed.
SECRET_KEY = os.getenv(
    'SECRET_KEY',
    'django-insecure-androscan-local-key'
)

DEBUG = os.getenv('DEBUG', 'False') == 'True'

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    'apk',
    'rules',
    'reports',
    'scanner',
    'fixture_builder',
]

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [],
        },
    },
]

# Scanning is offline and stateless; no database.
DATABASES = {}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

# Scanner settings
# Empty means: csv for --matrix, text otherwise.
SCAN_DEFAULT_FORMAT = os.getenv('ANDROSCAN_FORMAT', '')
SCAN_MAX_WORKERS = int(os.getenv('ANDROSCAN_WORKERS', 4))
SCAN_LITERAL_LOOKBACK = int(os.getenv('ANDROSCAN_LOOKBACK', 8))
SCAN_KNOWLEDGE_BASE = Path(os.getenv(
    'ANDROSCAN_KB',
    BASE_DIR / 'rules' / 'data' / 'knowledge_base.json'
))

# Fixture builder output
FIXTURE_OUTPUT_DIR = Path(os.getenv('ANDROSCAN_FIXTURE_DIR', BASE_DIR / 'fixtures_out'))

# Logging
# Reports go to stdout, so log output stays on stderr and quiet by default.
LOG_LEVEL = os.getenv('ANDROSCAN_LOG_LEVEL', 'WARNING').upper()
LOG_FILE = os.getenv('ANDROSCAN_LOG_FILE', '')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'level': 'DEBUG',
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'simple',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': LOG_LEVEL,
    },
}

if LOG_FILE:
    LOGGING['handlers']['file'] = {
        'level': 'ERROR',
        'class': 'logging.FileHandler',
        'filename': LOG_FILE,
        'formatter': 'simple',
    }
    LOGGING['root']['handlers'].append('file')
