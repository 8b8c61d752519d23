from __future__ import annotations

from dataclasses import dataclass, replace

from ..units import Frequency, Unit
from .dialect import SET_HEADERS, TraceDetector, TypeDetector, format_number


@dataclass(frozen=True)
class InstrumentSettings:
    """Spectrum-analyzer parameter vector. ``None`` means AUTO (instrument default)."""

    unit: Unit
    f_start: Frequency
    f_stop: Frequency
    attenuation: float | None = None
    resolution_bw: Frequency | None = None
    video_bw: Frequency | None = None
    sweep_points: int | None = None
    trace_detector: TraceDetector | None = None
    type_detector: TypeDetector | None = None
    avg_samples: int | None = None
    ref_level: float | None = None
    scale_div: float | None = None
    preamp: bool | None = None

    def __post_init__(self):
        if Unit(self.unit) not in (Unit.DBM_M2, Unit.VPM):
            raise ValueError(f"instrument unit must be DBM_M2 or VPM, got {self.unit}")
        if not self.f_start < self.f_stop:
            raise ValueError("f_start must be below f_stop")
        if self.avg_samples is not None and self.avg_samples < 1:
            raise ValueError("avg_samples must be >= 1")
        if self.scale_div is not None and not self.scale_div > 0:
            raise ValueError("scale_div must be positive when explicit")
        if self.sweep_points is not None and self.sweep_points < 2:
            raise ValueError("sweep_points must be >= 2")

    def with_span(self, f_start: Frequency, f_stop: Frequency) -> InstrumentSettings:
        return replace(self, f_start=f_start, f_stop=f_stop)

    def encode(self) -> list[tuple[str, str]]:
        """(field, command line) pairs, one per non-AUTO field, in SET_HEADERS order."""
        out = []
        for name, header in SET_HEADERS.items():
            value = getattr(self, name)
            if value is None:
                continue
            out.append((name, f"{header} {_encode_value(value)}"))
        return out


def _encode_value(value) -> str:
    if isinstance(value, bool):
        return "ON" if value else "OFF"
    if isinstance(value, Frequency):
        return str(value.hertz)
    if isinstance(value, (Unit, TraceDetector, TypeDetector)):
        return value.value
    return format_number(value)
