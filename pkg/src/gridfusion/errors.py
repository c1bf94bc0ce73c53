"""Exception hierarchy for gridfusion.

Every error carries the process exit code the CLI reports for it.
"""


class GridFusionError(Exception):
    """Base class for all gridfusion errors"""

    exit_code = 1


class ConfigError(GridFusionError):
    """Config file or preset is malformed or inconsistent"""

    exit_code = 2


class InputError(GridFusionError):
    """A referenced input is missing or unreadable"""

    exit_code = 3


class NumericalError(GridFusionError):
    """Non-finite values reached a numerical operation"""

    exit_code = 4


class GridFormatError(InputError):
    """FGRD stream could not be decoded, or a grid cannot be stored as FGRD.

    ``code`` is one of ``BAD_MAGIC``, ``BAD_VERSION``, ``TRUNCATED_PAYLOAD``,
    ``DIM_OVERFLOW``, ``BAD_METADATA`` or ``BAD_DTYPE``.
    """

    BAD_MAGIC = 'bad magic'
    BAD_VERSION = 'bad version'
    TRUNCATED_PAYLOAD = 'truncated payload'
    DIM_OVERFLOW = 'dim overflow'
    BAD_METADATA = 'bad metadata'
    BAD_DTYPE = 'bad dtype'

    def __init__(self, code, detail=''):
        self.code = code
        message = code if not detail else f"{code}: {detail}"
        super().__init__(message)


class ContractError(ValueError, GridFusionError):
    """A documented precondition was violated by the caller"""

    exit_code = 2


class GridMismatchError(ContractError):
    """Two grids disagree on a field that must match"""

    def __init__(self, field, detail=''):
        self.field = field
        message = f"grid mismatch on {field}" + (f": {detail}" if detail else '')
        super().__init__(message)


class ShapeMismatchError(ContractError):
    """An array does not have the shape an operation requires"""
