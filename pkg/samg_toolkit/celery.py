"""
Celery app for running solver commands in background workers.
"""
import os
from celery import Celery

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'samg_toolkit.settings')

app = Celery('samg_toolkit')

# Broker, serializers and acks come from the CELERY_* settings.
app.config_from_object('django.conf:settings', namespace='CELERY')

# Picks up solvers.tasks.
app.autodiscover_tasks()
