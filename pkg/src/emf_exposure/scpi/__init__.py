from .client import ScpiClient, TranscriptEntry, parse_address
from .dialect import TraceDetector, TypeDetector
from .settings import InstrumentSettings

__all__ = [
    "InstrumentSettings",
    "ScpiClient",
    "TraceDetector",
    "TranscriptEntry",
    "TypeDetector",
    "parse_address",
]
