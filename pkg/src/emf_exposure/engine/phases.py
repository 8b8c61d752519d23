"""P1/P2/P3 orchestration and the end-to-end session flow."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

from ..clock import Clock
from ..errors import (
    DegenerateSignalError,
    EmptySelectionError,
    ExposureError,
    OperatorDeclined,
    PartialSeriesError,
    StaleTrafficError,
    TransportError,
)
from ..model import (
    DOWNLINK_SIDE,
    UPLINK_SIDE,
    BandPlan,
    Direction,
    Duplex,
    ExposureSeries,
    Session,
    SessionNote,
    Source,
)
from ..storage import save_session
from ..traffic import TrafficController, TrafficSession, TrafficSpec
from ..units import Unit
from .algorithms import iterate_adjust, nar_band_meas, preamp_management, sel_band_use
from .operator import Operator, ask
from .params import EngineParams, active_settings, environmental_settings, wide_span_settings

log = logging.getLogger(__name__)

P1_DUPLEX = (Duplex.FDD_DL, Duplex.TDD)


@dataclass(frozen=True)
class SessionMetadata:
    location_label: str
    los: bool
    distance_to_rbs_m: float
    direction: Direction = Direction.UL


def _clock(instr, clock: Clock | None) -> Clock:
    return clock if clock is not None else instr.clock


def _confirm(operator: Operator | None, step: str) -> None:
    if not ask(operator, step):
        raise OperatorDeclined(f"operator did not confirm {step}")


def _floor_series(plan: BandPlan, band_id: str, params: EngineParams, clock: Clock) -> ExposureSeries:
    level = plan.min_level(band_id, False)
    t = clock.now()
    return ExposureSeries(band_id, Unit.DBM_M2, tuple((t, level) for _ in range(params.n_samples)), Source.RBS_ENV)


def run_p1(
    instr,
    plan: BandPlan,
    params: EngineParams,
    operator: Operator | None = None,
    *,
    clock: Clock | None = None,
    notes: list[SessionNote] | None = None,
) -> list[ExposureSeries]:
    """Environmental exposure over every downlink and TDD band, in dBm/m^2."""
    clock = _clock(instr, clock)
    notes = notes if notes is not None else []
    _confirm(operator, "M1")
    out: list[ExposureSeries] = []
    for band in plan.bands_with(P1_DUPLEX):
        instr.set_preamp(False)
        try:
            result = iterate_adjust(instr, band, params, False, plan.noise_floor, clock)
            result = preamp_management(instr, band, params, result, plan.noise_floor, clock)
            settings = environmental_settings(band, params, result.ref_level, result.scale_div)
            out.append(nar_band_meas(instr, settings, band, params, clock, Source.RBS_ENV))
        except DegenerateSignalError as exc:
            notes.append(SessionNote("P1", band.id, f"{exc}; recorded at noise floor"))
            out.append(_floor_series(plan, band.id, params, clock))
        except PartialSeriesError as exc:
            notes.append(SessionNote("P1", band.id, str(exc)))
            if exc.samples:
                out.append(ExposureSeries(band.id, Unit.DBM_M2, tuple(exc.samples), Source.RBS_ENV))
    instr.set_preamp(False)
    return out


def _measure_bands(instr, plan, band_ids, params, clock, source, phase, notes,
                   traffic: TrafficSession | None = None) -> list[ExposureSeries]:
    out = []
    for bid in band_ids:
        if traffic is not None and not traffic.running:
            raise StaleTrafficError(f"{phase}: traffic ended ({traffic.state.value}) before {bid}")
        band = plan.band(bid)
        try:
            out.append(nar_band_meas(instr, active_settings(band, params), band, params, clock, source))
        except PartialSeriesError as exc:
            notes.append(SessionNote(phase, bid, str(exc)))
            if exc.samples:
                out.append(ExposureSeries(bid, Unit.VPM, tuple(exc.samples), source))
    return out


def run_p2(
    instr,
    traffic: TrafficController,
    plan: BandPlan,
    params: EngineParams,
    operator: Operator | None = None,
    *,
    clock: Clock | None = None,
    direction: Direction = Direction.UL,
    target_rate: float | None = None,
    notes: list[SessionNote] | None = None,
) -> tuple[list[str], list[ExposureSeries], TrafficSession]:
    """Detect the bands carrying a bulk transfer and measure the uplink side.

    The traffic session is returned still running so P3 can use it; it is
    stopped here only when P2 itself fails.
    """
    clock = _clock(instr, clock)
    notes = notes if notes is not None else []
    _confirm(operator, "M2")
    instr.apply_settings(wide_span_settings(params))
    span1 = instr.query_trace()
    spec = TrafficSpec(direction=direction, target_rate=target_rate, duration=params.iperf_duration)
    session = traffic.start(spec)
    try:
        if session.error:
            notes.append(SessionNote("P2", None, f"traffic: {session.error}"))
        clock.sleep(spec.report_interval)
        span2 = instr.query_trace()
        selected = sel_band_use(span1, span2, plan, params.thre_inc, params.per_band_peak)
        if not selected:
            raise EmptySelectionError("no band showed a traffic-driven increase")
        ul_side = [b for b in selected if plan.band(b).duplex in UPLINK_SIDE]
        series = _measure_bands(instr, plan, ul_side, params, clock, Source.UE_ACTIVE, "P2", notes)
    except BaseException:
        traffic.stop(session)
        raise
    return selected, series, session


def run_p3(
    instr,
    traffic: TrafficController,
    session: TrafficSession,
    selected: list[str],
    plan: BandPlan,
    params: EngineParams,
    operator: Operator | None = None,
    *,
    clock: Clock | None = None,
    notes: list[SessionNote] | None = None,
) -> list[ExposureSeries]:
    """Measure the downlink side of the selection while the transfer runs, then stop it."""
    clock = _clock(instr, clock)
    notes = notes if notes is not None else []
    try:
        _confirm(operator, "M3")
        if not session.running:
            raise StaleTrafficError(f"P3: traffic already {session.state.value.lower()}")
        dl_side = [b for b in selected if plan.band(b).duplex in DOWNLINK_SIDE]
        return _measure_bands(instr, plan, dl_side, params, clock, Source.RBS_ACTIVE, "P3", notes, session)
    finally:
        traffic.stop(session)


def run_session(
    instr,
    traffic: TrafficController,
    plan: BandPlan,
    params: EngineParams,
    operator: Operator | None,
    metadata: SessionMetadata,
    *,
    clock: Clock | None = None,
    target_rate: float | None = None,
    save_to: str | os.PathLike | None = None,
) -> Session:
    """M1 -> P1 -> M2 -> P2 -> M3 -> P3. Failures are annotated, never lost.

    Whatever was measured before an error is kept in the returned (and, with
    `save_to`, persisted) session.
    """
    clock = _clock(instr, clock)
    notes: list[SessionNote] = []
    p1: list[ExposureSeries] = []
    p2: list[ExposureSeries] = []
    p3: list[ExposureSeries] = []
    selected: list[str] = []
    tsession: TrafficSession | None = None

    def record(phase: str, exc: Exception) -> None:
        log.warning("%s: %s", phase, exc)
        notes.append(SessionNote(phase, None, f"{type(exc).__name__}: {exc}"))

    try:
        p1 = run_p1(instr, plan, params, operator, clock=clock, notes=notes)
    except ExposureError as exc:
        record("P1", exc)
        if isinstance(exc, (OperatorDeclined, TransportError)):
            return _finish(metadata, p1, selected, p2, p3, tsession, notes, save_to)
    try:
        selected, p2, tsession = run_p2(instr, traffic, plan, params, operator, clock=clock,
                                        direction=metadata.direction, target_rate=target_rate, notes=notes)
    except ExposureError as exc:
        record("P2", exc)
        return _finish(metadata, p1, selected, p2, p3, tsession, notes, save_to)
    try:
        p3 = run_p3(instr, traffic, tsession, selected, plan, params, operator, clock=clock, notes=notes)
    except ExposureError as exc:
        record("P3", exc)
    return _finish(metadata, p1, selected, p2, p3, tsession, notes, save_to)


def _finish(meta, p1, selected, p2, p3, tsession, notes, save_to) -> Session:
    session = Session(
        location_label=meta.location_label,
        los=meta.los,
        distance_to_rbs_m=meta.distance_to_rbs_m,
        direction=meta.direction,
        phase1=tuple(p1),
        selected_bands=tuple(selected),
        phase2=tuple(p2),
        phase3=tuple(p3),
        throughput_log=tuple(tsession.samples) if tsession is not None else (),
        errors=tuple(notes),
    )
    if save_to is not None:
        save_session(session, save_to)
    return session

