"""Exception hierarchy shared by all modules.

Each class maps onto one CLI exit code (see ``tdsisr.cli_io``).
"""


class SisrError(Exception):
    exit_code = 1


class ParameterError(SisrError, ValueError):
    """Invalid configuration value (rate, sigma, rank, empty mask, ...)."""

    exit_code = 1


class VolumeIOError(SisrError, OSError):
    exit_code = 2


class MissingSidecarError(VolumeIOError):
    pass


class UnknownDtypeError(VolumeIOError):
    pass


class LengthMismatchError(VolumeIOError):
    pass


class DimensionError(SisrError, ValueError):
    """Operand shapes do not agree."""

    exit_code = 3


class DivergenceError(SisrError, ArithmeticError):
    """An iterative solver produced a non-finite value.

    The per-sweep residual trace up to the failure is kept on ``trace``.
    """

    exit_code = 4

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])
