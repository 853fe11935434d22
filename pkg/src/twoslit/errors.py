"""Exception types shared across the package."""


class TwoSlitError(Exception):
    """Base class for all package errors."""


class DomainError(TwoSlitError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(TwoSlitError, ValueError):
    """A configuration value is missing, malformed or out of range.

    ``field`` names the offending key (dotted path) when known.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class SamplingError(TwoSlitError, RuntimeError):
    """Rejection sampling could not make progress."""


class IntegrationError(TwoSlitError, RuntimeError):
    """A trajectory reached a non-finite state."""

    def __init__(self, message, z=None):
        self.z = z
        super().__init__(message)


class AggregationError(TwoSlitError, ValueError):
    pass


class CorrectionError(TwoSlitError, ValueError):
    pass


class CalibrationError(TwoSlitError, ValueError):
    pass
