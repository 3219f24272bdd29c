"""
Numeric defaults and guards, read from Django settings.
"""
import os

from django.conf import settings


def setting(name, default):
    return getattr(settings, name, default)


def joint_guard():
    return setting('SAMG_JOINT_GUARD', 10**7)


def enumeration_guard():
    return setting('SAMG_ENUMERATION_GUARD', 10**6)


def stage_action_guard():
    return setting('SAMG_STAGE_ACTION_GUARD', 4096)


def direct_solve_limit():
    return setting('SAMG_DIRECT_SOLVE_LIMIT', 2000)


def default_tol():
    return setting('SAMG_DEFAULT_TOL', 1e-8)


def max_workers():
    threads = setting('SAMG_THREADS', None)
    return max(1, int(threads or os.cpu_count() or 1))
