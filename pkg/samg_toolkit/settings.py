"""
Django settings for the samg_toolkit project.
Solvers and verification tools for finite state-adversarial Markov games.
"""

import os
from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = config('SECRET_KEY', default='django-insecure-samg-toolkit-local-only')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = config('ALLOWED_HOSTS', default='localhost,127.0.0.1').split(',')


# Application definition

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',

    # Local apps
    'games.apps.GamesConfig',
    'solvers.apps.SolversConfig',
]

MIDDLEWARE = [
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
]

ROOT_URLCONF = 'samg_toolkit.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]


# Database

DATABASE_URL = os.environ.get('DATABASE_URL')

if DATABASE_URL:
    # Shared database so background workers and the CLI see the same runs
    import dj_database_url
    DATABASES = {
        'default': dj_database_url.config(
            default=DATABASE_URL,
            conn_max_age=600,
            conn_health_checks=True,
        )
    }
else:
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.sqlite3',
            'NAME': config('SAMG_DB_PATH', default=str(BASE_DIR / 'db.sqlite3')),
        }
    }

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True


# Solver configuration

SAMG_THREADS = config('SAMG_THREADS', default=os.cpu_count() or 1, cast=int)
SAMG_DEFAULT_TOL = config('SAMG_DEFAULT_TOL', default=1e-8, cast=float)
SAMG_DEFAULT_EPS = config('SAMG_DEFAULT_EPS', default=1e-6, cast=float)
SAMG_SCAN_EPS = config('SAMG_SCAN_EPS', default=1e-3, cast=float)
SAMG_DEFAULT_ETA = config('SAMG_DEFAULT_ETA', default=0.05, cast=float)
SAMG_DEFAULT_ITERS = config('SAMG_DEFAULT_ITERS', default=10_000, cast=int)
SAMG_DEFAULT_SEED = config('SAMG_DEFAULT_SEED', default=0, cast=int)
SAMG_DEFAULT_EPISODES = config('SAMG_DEFAULT_EPISODES', default=10_000, cast=int)
SAMG_DEFAULT_HORIZON = config('SAMG_DEFAULT_HORIZON', default=2000, cast=int)
SAMG_DEFAULT_GRID = config('SAMG_DEFAULT_GRID', default=11, cast=int)
SAMG_JOINT_GUARD = config('SAMG_JOINT_GUARD', default=10**7, cast=int)
SAMG_ENUMERATION_GUARD = config('SAMG_ENUMERATION_GUARD', default=10**6, cast=int)
SAMG_STAGE_ACTION_GUARD = config('SAMG_STAGE_ACTION_GUARD', default=4096, cast=int)
SAMG_DIRECT_SOLVE_LIMIT = config('SAMG_DIRECT_SOLVE_LIMIT', default=2000, cast=int)
SAMG_SIM_BATCH = config('SAMG_SIM_BATCH', default=512, cast=int)
SAMG_SIM_STEP_CHUNK = config('SAMG_SIM_STEP_CHUNK', default=64, cast=int)


# Celery Configuration
CELERY_BROKER_URL = config('CELERY_BROKER_URL', default='redis://localhost:6379/0')
CELERY_RESULT_BACKEND = config('CELERY_RESULT_BACKEND', default='redis://localhost:6379/0')
CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_TIMEZONE = TIME_ZONE
CELERY_TASK_ACKS_LATE = True


# Logging configuration
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
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
        'level': 'WARNING',
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': os.getenv('DJANGO_LOG_LEVEL', 'WARNING'),
            'propagate': False,
        },
        'games': {
            'handlers': ['console'],
            'level': config('SAMG_LOG_LEVEL', default='WARNING'),
            'propagate': False,
        },
        'solvers': {
            'handlers': ['console'],
            'level': config('SAMG_LOG_LEVEL', default='WARNING'),
            'propagate': False,
        },
    },
}


# Error tracking for background solver runs (optional)
SENTRY_DSN = config('SENTRY_DSN', default='')

if SENTRY_DSN:
    import sentry_sdk
    from sentry_sdk.integrations.celery import CeleryIntegration
    from sentry_sdk.integrations.django import DjangoIntegration

    sentry_sdk.init(
        dsn=SENTRY_DSN,
        integrations=[DjangoIntegration(), CeleryIntegration()],
        traces_sample_rate=0.0,
        send_default_pii=False,
    )
