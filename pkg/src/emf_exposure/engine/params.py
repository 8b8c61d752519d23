from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import yaml

from ..errors import ConfigError
from ..model import Band
from ..scpi.dialect import TraceDetector, TypeDetector
from ..scpi.settings import InstrumentSettings
from ..units import Frequency, Unit


@dataclass(frozen=True)
class EngineParams:
    safety_margin: float = 10.0  # dB
    max_time_search: int = 5  # s, one max-level poll per second
    y_ticks: int = 10
    adjust_iterations: int = 3
    preamp_threshold: float = -48.77  # dBm/m^2
    n_samples: int = 12
    int_sample_time: float = 0.5  # s
    thre_inc: float = 30.0  # percent
    wide_span_start_mhz: float = 791.0
    wide_span_stop_mhz: float = 3620.0
    ref_level_active: float = 6.0  # V/m
    iperf_duration: float = 120.0  # s
    avg_samples: int = 100
    initial_ref_level: float = 65.0  # dBm/m^2
    initial_scale_div: float = 15.0
    per_band_peak: bool = False

    def __post_init__(self):
        positive = (
            "max_time_search", "y_ticks", "adjust_iterations", "n_samples", "int_sample_time",
            "thre_inc", "ref_level_active", "iperf_duration", "avg_samples", "initial_scale_div",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.safety_margin < 0:
            raise ValueError("safety_margin must be >= 0")
        if not self.wide_span_start_mhz < self.wide_span_stop_mhz:
            raise ValueError("wide span start must be below stop")

    @property
    def wide_span(self) -> tuple[Frequency, Frequency]:
        return Frequency.from_mhz(self.wide_span_start_mhz), Frequency.from_mhz(self.wide_span_stop_mhz)


def params_from_dict(data: dict | None) -> EngineParams:
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("engine params: top level must be a mapping")
    known = {f.name: f for f in fields(EngineParams)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"engine params: unknown field(s) {sorted(unknown)}")
    try:
        kwargs = {}
        for k, v in data.items():
            default = getattr(EngineParams, k)
            kwargs[k] = bool(v) if isinstance(default, bool) else type(default)(v)
        return EngineParams(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"engine params: {exc}") from exc


def load_params(path: str | os.PathLike | None) -> EngineParams:
    if path is None:
        return EngineParams()
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"engine params: {exc}") from exc
    return params_from_dict(data)


def dump_params(params: EngineParams) -> str:
    return yaml.safe_dump(asdict(params), sort_keys=False)


# --- instrument setting presets --------------------------------------------------


def adjust_settings(band: Band, params: EngineParams, ref_level: float | None = None,
                    scale_div: float | None = None) -> InstrumentSettings:
    """Max-level search settings used while tuning reference level and scale."""
    return InstrumentSettings(
        unit=Unit.DBM_M2,
        f_start=band.f_start,
        f_stop=band.f_stop,
        trace_detector=TraceDetector.RMS,
        type_detector=TypeDetector.ROLLING_MAX,
        ref_level=params.initial_ref_level if ref_level is None else ref_level,
        scale_div=params.initial_scale_div if scale_div is None else scale_div,
    )


def environmental_settings(band: Band, params: EngineParams, ref_level: float, scale_div: float) -> InstrumentSettings:
    return InstrumentSettings(
        unit=Unit.DBM_M2,
        f_start=band.f_start,
        f_stop=band.f_stop,
        trace_detector=TraceDetector.RMS,
        type_detector=TypeDetector.ROLLING_AVERAGE,
        avg_samples=params.avg_samples,
        ref_level=ref_level,
        scale_div=scale_div,
    )


def active_settings(band: Band, params: EngineParams) -> InstrumentSettings:
    return InstrumentSettings(
        unit=Unit.VPM,
        f_start=band.f_start,
        f_stop=band.f_stop,
        trace_detector=TraceDetector.RMS,
        type_detector=TypeDetector.ROLLING_AVERAGE,
        avg_samples=params.avg_samples,
        ref_level=params.ref_level_active,
        preamp=False,
    )


def wide_span_settings(params: EngineParams) -> InstrumentSettings:
    start, stop = params.wide_span
    return InstrumentSettings(
        unit=Unit.VPM,
        f_start=start,
        f_stop=stop,
        trace_detector=TraceDetector.RMS,
        type_detector=TypeDetector.MAX,
        ref_level=params.ref_level_active,
        preamp=False,
    )
