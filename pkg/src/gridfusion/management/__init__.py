"""Django wiring for the gridfusion management commands."""
import os

import django

SETTINGS_MODULE = "gridfusion.settings"

COMMANDS = (
    'scene',
    'lidar',
    'encode',
    'warp',
    'fuse',
    'occupancy',
    'filter-valid',
    'gradcheck',
    'run',
)


def command_module(name):
    """Module name of CLI subcommand ``name`` (dashes map to underscores)."""
    return name.replace('-', '_')


def configure_django():
    """Point Django at the gridfusion settings and load the app registry."""
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", SETTINGS_MODULE)
    django.setup()
