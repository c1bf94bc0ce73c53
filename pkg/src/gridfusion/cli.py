"""``gridfusion`` command-line entry point.

Subcommands are Django management commands dispatched by ManagementUtility.
Exit codes: 0 success, 1 unexpected failure, 2 config or contract error,
3 missing or unreadable input, 4 numerical failure.
"""
import sys

from django.core.management import execute_from_command_line

from . import __version__
from .management import COMMANDS, command_module, configure_django


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv in (['--version'], ['version']):
        sys.stdout.write(f"gridfusion {__version__}\n")
        return 0
    configure_django()
    if argv and argv[0] in COMMANDS:
        argv[0] = command_module(argv[0])
    execute_from_command_line(['gridfusion', *(str(arg) for arg in argv)])
    return 0


def run():
    sys.exit(main())
