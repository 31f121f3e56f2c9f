"""Exception hierarchy shared by the library and the CLI."""


class AnytimeError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(AnytimeError, ValueError):
    """Invalid code, channel, plant or quantizer parameters."""


class CodeFormatError(AnytimeError, ValueError):
    """A code file could not be parsed."""


class InconsistentSystemError(AnytimeError, ArithmeticError):
    """A GF(2) system M x = s has no solution."""


class DesyncError(AnytimeError):
    """
    The quantizer bin or measurement slab does not match the current set.

    Attributes:
        ambiguous: True when several bins matched, False when none did.
    """

    def __init__(self, message: str, ambiguous: bool = False) -> None:
        super().__init__(message)
        self.ambiguous = ambiguous


class CheckpointError(AnytimeError, IndexError):
    """A filter replay was requested outside the stored horizon."""


class ConvergenceError(AnytimeError, ArithmeticError):
    """An iterative numerical routine hit its iteration cap."""

    def __init__(self, message: str, residual: float) -> None:
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class ConfigError(AnytimeError, ValueError):
    """A run configuration violated the schema at a given JSON path."""

    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path
