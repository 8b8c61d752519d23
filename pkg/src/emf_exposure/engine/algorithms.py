"""Reference-level tuning, pre-amplifier management, narrow-band sampling and
detection of the bands carrying an active transfer."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from ..clock import Clock
from ..errors import DegenerateSignalError, GridMismatchError, OverRange, PartialSeriesError, PreampRejected, QueryFailed
from ..model import Band, BandPlan, Duplex, ExposureSeries, NoiseFloorTable, Source, SpectrumTrace
from ..scpi.settings import InstrumentSettings
from ..units import Unit, convert
from .params import EngineParams, adjust_settings

MAX_LEVEL_SENTINEL = -200.0


@dataclass(frozen=True)
class AdjustResult:
    ref_level: float
    scale_div: float
    preamp: bool


def adjust_ref_level_scale_div(
    instr,
    settings: InstrumentSettings,
    band: Band,
    params: EngineParams,
    preamp_state: bool,
    noise_floor: NoiseFloorTable,
    clock: Clock,
) -> AdjustResult:
    """Track the band's peak level for `max_time_search` seconds, then set the
    reference level to ceil(peak) + safety margin and spread the display down
    to the band's noise floor over `y_ticks` divisions."""
    instr.apply_settings(settings)
    instr.reset_trace()
    max_l = MAX_LEVEL_SENTINEL
    for _ in range(int(params.max_time_search)):
        max_l = max(max_l, instr.query_max_level(band.f_start, band.f_stop))
        clock.sleep(1.0)
    if max_l <= MAX_LEVEL_SENTINEL:
        raise DegenerateSignalError(f"{band.id}: no level above {MAX_LEVEL_SENTINEL} dBm/m^2")
    ref_level = float(math.ceil(max_l) + params.safety_margin)
    instr.set_ref_level(ref_level)
    min_l = noise_floor.min_level(band.id, preamp_state)
    scale_div = abs(ref_level - min_l) / params.y_ticks
    if scale_div <= 0:
        raise DegenerateSignalError(f"{band.id}: reference level coincides with the noise floor")
    instr.set_scale_div(scale_div)
    return AdjustResult(ref_level, scale_div, preamp_state)


def iterate_adjust(instr, band: Band, params: EngineParams, preamp: bool, noise_floor: NoiseFloorTable,
                   clock: Clock, start: AdjustResult | None = None, iterations: int | None = None) -> AdjustResult:
    """Run the adjust routine repeatedly, each pass starting from the previous result."""
    result = start
    for _ in range(iterations or params.adjust_iterations):
        settings = adjust_settings(
            band, params,
            None if result is None else result.ref_level,
            None if result is None else result.scale_div,
        )
        result = adjust_ref_level_scale_div(instr, settings, band, params, preamp, noise_floor, clock)
    assert result is not None
    return result


def preamp_management(
    instr,
    band: Band,
    params: EngineParams,
    last: AdjustResult,
    noise_floor: NoiseFloorTable,
    clock: Clock,
) -> AdjustResult:
    """Enable the pre-amplifier for weak signals and keep it only while the
    reference level stays below the threshold.

    A violation (or an ADC over-range) switches it off, restores the levels
    found before pre-amplification and re-runs one adjust pass.
    """
    threshold = params.preamp_threshold
    if last.preamp or last.ref_level >= threshold:
        return last
    try:
        instr.set_preamp(True)
        current = None
        for _ in range(params.adjust_iterations):
            current = iterate_adjust(instr, band, params, True, noise_floor, clock, start=current or last, iterations=1)
            if current.ref_level >= threshold:
                break
        else:
            return current
    except (PreampRejected, OverRange):
        pass
    # revert to the state before pre-amplification
    instr.set_preamp(False)
    instr.set_ref_level(last.ref_level)
    instr.set_scale_div(last.scale_div)
    return iterate_adjust(instr, band, params, False, noise_floor, clock, start=last, iterations=1)


def nar_band_meas(
    instr,
    settings: InstrumentSettings,
    band: Band,
    params: EngineParams,
    clock: Clock,
    source: Source,
) -> ExposureSeries:
    """`n_samples` channel-power readings spaced `int_sample_time` apart."""
    instr.apply_settings(settings)
    samples: list[tuple[float, float]] = []
    for _ in range(params.n_samples):
        try:
            value = instr.query_channel_power(band.f_start, band.f_stop)
        except QueryFailed as exc:
            raise PartialSeriesError(f"{band.id}: channel power failed after {len(samples)} samples: {exc}",
                                     samples) from exc
        samples.append((clock.now(), value))
        clock.sleep(params.int_sample_time)
    return ExposureSeries(band.id, Unit(settings.unit), tuple(samples), source)


def noise_field(plan: BandPlan, band: Band) -> float:
    """Field strength equivalent to the band's pre-amp-off noise floor, V/m."""
    return convert(plan.min_level(band.id, False), Unit.DBM_M2, Unit.VPM)


def incr_percent(v2: float, v1: float, floor: float) -> float:
    """Percent increase of `v2` over `v1` with the denominator clamped at `floor`."""
    return 100.0 * (v2 - v1) / max(v1, floor)


@lru_cache(maxsize=16)
def _grid_bands(plan: BandPlan, freqs: tuple[int, ...]) -> tuple[Band | None, ...]:
    return tuple(plan.find_band(f) for f in freqs)


def sel_band_use(
    span1: SpectrumTrace,
    span2: SpectrumTrace,
    plan: BandPlan,
    thre_inc: float,
    per_band_peak: bool = False,
) -> list[str]:
    """Bands whose field rose by more than `thre_inc` percent between two scans.

    An uplink FDD band drags its downlink pair along. Grid points in guard
    gaps are ignored. Result is ordered by start frequency.
    """
    f1, f2 = span1.frequencies_hz, span2.frequencies_hz
    if f1 != f2:
        raise GridMismatchError("the two wide-span scans use different frequency grids")
    v1, v2 = span1.values, span2.values
    bands = _grid_bands(plan, tuple(f1))
    floors = {b.id: noise_field(plan, b) for b in plan.bands}
    marked: set[str] = set()

    def mark(band: Band) -> None:
        marked.add(band.id)
        if band.duplex is Duplex.FDD_UL and band.paired_band is not None:
            marked.add(band.paired_band)

    if per_band_peak:
        peaks: dict[str, list[float]] = {}
        for band, a, b in zip(bands, v1, v2):
            if band is None:
                continue
            p = peaks.setdefault(band.id, [0.0, 0.0])
            p[0], p[1] = max(p[0], a), max(p[1], b)
        for bid, (a, b) in peaks.items():
            band = plan.band(bid)
            if incr_percent(b, a, floors[bid]) > thre_inc:
                mark(band)
    else:
        for band, a, b in zip(bands, v1, v2):
            if band is None:
                continue
            if incr_percent(b, a, floors[band.id]) > thre_inc:
                mark(band)
    return [b.id for b in plan.sorted_bands() if b.id in marked]
