"""Shared base for the gridfusion management commands."""
import logging

from django.core.management.base import BaseCommand, CommandError

from .. import __version__
from ..config import load_config
from ..errors import GridFusionError

logger = logging.getLogger(__name__)

VERBOSITY_LEVELS = {0: logging.ERROR, 1: logging.WARNING, 2: logging.INFO, 3: logging.DEBUG}
LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def configure_logging(verbosity):
    level = VERBOSITY_LEVELS.get(int(verbosity), logging.DEBUG)
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.getLogger('gridfusion').setLevel(level)


class GridFusionCommand(BaseCommand):
    """A ``gridfusion <name>`` subcommand.

    Subclasses set ``help``, declare options in ``add_arguments`` and do
    their work in ``handle``. A GridFusionError raised there becomes a
    CommandError whose returncode is the error's exit code.
    """

    requires_system_checks = []
    # commands that read a run config get --config/--preset
    uses_config = True

    def get_version(self):
        return __version__

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        if self.uses_config:
            parser.add_argument('--config', help='Path to a JSON run config')
            parser.add_argument('--preset', help='Name of a built-in preset')
        parser.add_argument('--seed', type=int, default=None, help='Override the config seed')
        return parser

    def load_config(self, options):
        return load_config(options.get('config'), options.get('preset'), options.get('seed'))

    def execute(self, *args, **options):
        configure_logging(options.get('verbosity', 1))
        try:
            return super().execute(*args, **options)
        except GridFusionError as exc:
            logger.debug("Command failed", exc_info=True)
            raise CommandError(str(exc), returncode=exc.exit_code) from exc
