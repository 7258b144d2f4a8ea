"""Exception types shared across the package."""


class GeoprobError(Exception):
    """Base class for all package errors."""


class ParameterError(GeoprobError, ValueError):
    """Invalid argument value (nonpositive intensity, k out of range, ...)."""


class DegenerateInputError(GeoprobError, ValueError):
    """Input is a measure-zero degenerate configuration the operation rejects
    (all-collinear triangulation input, duplicate time marks, ...)."""


class TruncationError(GeoprobError, RuntimeError):
    """The finite simulation window is too small for the requested accuracy."""

    def __init__(self, message, suggested_half_width=None):
        super().__init__(message)
        self.suggested_half_width = suggested_half_width


class GridTooSmallError(GeoprobError, RuntimeError):
    """The probe grid does not cover the stabilization radius often enough."""


class ExtrapolationError(GeoprobError, ValueError):
    """A lookup table does not cover the requested evaluation range."""


class ParseError(GeoprobError, ValueError):
    """Malformed input file."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class DivergenceWarning(UserWarning):
    """An adaptive cutoff never met its decay criterion."""
