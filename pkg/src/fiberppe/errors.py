"""Exception types raised across the package."""


class PPEError(Exception):
    """Base class for all package errors."""


class ConfigError(PPEError, ValueError):
    """Invalid experiment configuration or argument combination."""


class DispersionManagedError(PPEError, ValueError):
    """The link mixes opposite-sign dispersion fibers.

    Accumulated dispersion is then not monotonic, several positions share the
    same nonlinear path and the profile is not identifiable.
    """


class SingularSystemError(PPEError, ArithmeticError):
    """The least-squares normal matrix could not be inverted reliably."""


class WaveformFormatError(PPEError, ValueError):
    """A waveform file is malformed, truncated or of an unknown version."""
