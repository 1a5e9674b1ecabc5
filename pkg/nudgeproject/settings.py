"""
Django settings for nudgeproject project.

The simulator is driven from management commands; the database only holds
run records (ExperimentRun, Sweep) and the admin that browses them.
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get('SECRET_KEY', 'django-insecure-default-key-for-development')

DEBUG = os.environ.get('DEBUG', 'True') == 'True'

ALLOWED_HOSTS = os.environ.get('ALLOWED_HOSTS', 'localhost,127.0.0.1').split(',')

# Application definition

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',

    # Local apps
    'core',
    'spectral',
    'mhd',
    'observation',
    'nudging',
    'diagnostics',
    'experiments',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'nudgeproject.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.debug',
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'nudgeproject.wsgi.application'

# Database
# PostgreSQL when PGDATABASE is set, a local SQLite file otherwise

if os.environ.get('PGDATABASE'):
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.postgresql',
            'NAME': os.environ.get('PGDATABASE'),
            'USER': os.environ.get('PGUSER'),
            'PASSWORD': os.environ.get('PGPASSWORD'),
            'HOST': os.environ.get('PGHOST'),
            'PORT': os.environ.get('PGPORT'),
        }
    }
else:
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.sqlite3',
            'NAME': BASE_DIR / 'db.sqlite3',
        }
    }

# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

STATIC_URL = 'static/'
STATIC_ROOT = BASE_DIR / 'staticfiles'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Simulator settings

ANALYSIS_CONSTANT_VARIABLES = {
    'c_L': 'MHDNUDGE_C_L',
    'c_B': 'MHDNUDGE_C_B',
    'c_T': 'MHDNUDGE_C_T',
    'c_M': 'MHDNUDGE_C_M',
}

MHDNUDGE = {
    'OUTPUT_DIR': os.environ.get('MHDNUDGE_OUTPUT_DIR', str(BASE_DIR / 'runs')),
    'SWEEP_WORKERS': int(os.environ.get('MHDNUDGE_SWEEP_WORKERS', '1')),
    'CFL_SAFETY': float(os.environ.get('MHDNUDGE_CFL_SAFETY', '0.5')),
    # inflation applied to empirical interpolant constants before they are stored
    'INFLATION': float(os.environ.get('MHDNUDGE_INFLATION', '1.05')),
    # only constants whose variable is set override the defaults
    'ANALYSIS_CONSTANTS': {
        name: float(os.environ[variable])
        for name, variable in ANALYSIS_CONSTANT_VARIABLES.items()
        if os.environ.get(variable)
    },
}

# Logging

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {name} {message}',
            'style': '{',
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
        'level': os.environ.get('MHDNUDGE_LOG_LEVEL', 'INFO'),
    },
}
