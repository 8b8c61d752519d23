"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ExposureError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ExposureError):
    """A configuration or data file could not be parsed or is inconsistent."""


class SchemaVersionError(ConfigError):
    pass


class DomainError(ExposureError, ValueError):
    """A physical quantity outside its domain (negative field, etc.)."""


class InsufficientDataError(ExposureError, ValueError):
    pass


# --- instrument / transport -------------------------------------------------


class TransportError(ExposureError):
    """Connection refused, timed out or dropped. Retriable by the caller."""


class InstrumentError(ExposureError):
    """The instrument answered with an error frame."""

    def __init__(self, code: int, command: str = "", message: str = ""):
        self.code = code
        self.command = command
        super().__init__(message or f"instrument error {code} for {command!r}")


class SettingsRejected(InstrumentError):
    def __init__(self, code: int, command: str, field: str):
        self.field = field
        super().__init__(code, command, f"setting {field!r} rejected (ERR {code}): {command!r}")


class QueryFailed(InstrumentError):
    pass


class OverRange(QueryFailed):
    """ADC over-range reported while the pre-amplifier is on."""


class PreampRejected(InstrumentError):
    pass


# --- engine -----------------------------------------------------------------


class EngineError(ExposureError):
    pass


class DegenerateSignalError(EngineError):
    """The max-level search never rose above the initial sentinel."""


class PartialSeriesError(EngineError):
    def __init__(self, message: str, samples: list):
        self.samples = samples
        super().__init__(message)


class EmptySelectionError(EngineError):
    pass


class StaleTrafficError(EngineError):
    pass


class GridMismatchError(EngineError, ValueError):
    pass


class OperatorDeclined(EngineError):
    pass


# --- analysis ---------------------------------------------------------------


class FitFailed(ExposureError):
    def __init__(self, message: str, best=None):
        self.best = best
        super().__init__(message)
