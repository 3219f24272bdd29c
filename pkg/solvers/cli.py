"""
Process-level entry point for the `samg` launcher.

Maps `samg <command> [options]` onto the `samg` management command and turns
its outcome into an exit status: 0 on success, 1 on validation failure and
2 on usage or IO errors.
"""
import os


def run(argv):
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'samg_toolkit.settings')

    import django
    django.setup()

    from solvers.management.commands.samg import Command

    try:
        Command().run_from_argv(['samg', 'samg', *argv])
    except SystemExit as e:
        if e.code is None:
            return 0
        return e.code if isinstance(e.code, int) else 1
    return 0
