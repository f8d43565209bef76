"""Exception types shared across the library."""


class LevelSetError(Exception):
    """Base class for all library errors."""


class DimensionError(LevelSetError, ValueError):
    """Grid shapes are degenerate, inconsistent, or missing."""


class ParameterError(LevelSetError, ValueError):
    """A numeric argument lies outside its valid domain."""


class DivergenceError(LevelSetError, ArithmeticError):
    """The level-set evolution produced non-finite values."""

    def __init__(self, step: int, message: str | None = None):
        self.step = int(step)
        super().__init__(message or f"evolution diverged at step {self.step}")


class GenerationError(LevelSetError, ValueError):
    """A synthetic instance request produced a degenerate result."""


class FieldFormatError(LevelSetError, ValueError):
    """A field container file is malformed."""
