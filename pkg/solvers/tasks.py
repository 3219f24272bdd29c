"""
Celery tasks for running solver commands in background workers.
"""
import io
import os
import tempfile
import time

from celery import shared_task
from django.core.management import call_command
from django.core.management.base import CommandError
import logging

from .models import SolveRun

logger = logging.getLogger(__name__)


def _without_flags(argv, *names):
    """Drop `names` and their values (for flags taking one) from an argv list."""
    cleaned, skip = [], False
    for arg in argv:
        if skip:
            skip = False
            continue
        if arg in ('--record', '--background'):
            continue
        if arg in names:
            skip = True
            continue
        cleaned.append(arg)
    return cleaned


@shared_task
def run_samg_command(run_id):
    """
    Replay a stored SolveRun through the samg command and record its
    machine-readable report and exit code.
    """
    run = SolveRun.objects.get(pk=run_id)
    logger.info(f'Starting solver run {run_id}: {run.command}')
    run.mark_running()
    argv = _without_flags(run.argv, '--out')
    handle, report_path = tempfile.mkstemp(suffix='.report')
    os.close(handle)
    started = time.monotonic()
    try:
        call_command('samg', run.command, *argv, '--out', report_path, stdout=io.StringIO())
        with open(report_path, encoding='utf-8') as report:
            run.mark_finished(0, report=report.read(), wall_time=time.monotonic() - started)
    except CommandError as e:
        logger.error(f'Solver run {run_id} failed: {str(e)}')
        run.mark_finished(e.returncode, error=str(e), wall_time=time.monotonic() - started)
        raise
    except Exception as e:
        logger.error(f'Error in solver run {run_id}: {str(e)}')
        run.mark_finished(1, error=str(e), wall_time=time.monotonic() - started)
        raise
    finally:
        os.unlink(report_path)
    logger.info(f'Solver run {run_id} completed successfully')
    return run.exit_code
