"""Exception types shared across the package."""


class QuantkError(Exception):
    """Base class for all package errors."""


class ValidationError(QuantkError, ValueError):
    """Malformed or inconsistent input; ``diagnostics`` holds measured values."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CertificationError(QuantkError):
    """A measured quantity failed a required bound.

    ``report`` carries the measured values so callers can print both sides.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


class SpectralGapError(QuantkError):
    """Spectrum is not separated where a construction needs it to be."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class PairabilityError(QuantkError):
    """Parameters fail the pairability inequality and no override was given."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}
