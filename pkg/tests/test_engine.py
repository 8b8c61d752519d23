import math
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emf_exposure.clock import SimulatedClock
from emf_exposure.engine import (
    AdjustResult,
    EngineParams,
    ScriptedOperator,
    adjust_ref_level_scale_div,
    incr_percent,
    nar_band_meas,
    preamp_management,
    run_p1,
    run_p2,
    run_p3,
    sel_band_use,
)
from emf_exposure.engine.params import adjust_settings, environmental_settings, load_params, params_from_dict
from emf_exposure.errors import (
    ConfigError,
    DegenerateSignalError,
    EmptySelectionError,
    GridMismatchError,
    OperatorDeclined,
    PartialSeriesError,
    StaleTrafficError,
)
from emf_exposure.model import Source
from emf_exposure.scpi.client import trace_grid
from emf_exposure.simulator import Emitter, Role, SceneConfig
from emf_exposure.traffic import SimulatedLink, TrafficController, TrafficSpec
from emf_exposure.units import Unit, convert

from helpers import FakeInstrument, make_trace, sub_plan

P = EngineParams()


# --- adjust -------------------------------------------------------------------


def test_adjust_hand_example(plan):
    band = plan.band("N78-3437")
    instr = FakeInstrument([-60.0, -52.3, -55.0, -58.0, -61.0])
    r = adjust_ref_level_scale_div(instr, adjust_settings(band, P), band, P, False, plan.noise_floor, instr.clock)
    assert r == AdjustResult(-42.0, 4.3, False)
    assert instr.ref_level == -42.0 and instr.scale_div == pytest.approx(4.3)
    # five polls, one per second, after a trace reset
    assert [c[0] for c in instr.calls].count("max") == 5
    assert instr.clock.now() == 5.0
    assert instr.calls[1] == ("reset",)


def test_adjust_degenerate_signal(plan):
    band = plan.band("B3-DL")
    instr = FakeInstrument([-200.0])
    with pytest.raises(DegenerateSignalError):
        adjust_ref_level_scale_div(instr, adjust_settings(band, P), band, P, False, plan.noise_floor, instr.clock)


def test_adjust_empty_scene_with_preamp(make_sim, plan):
    sim = make_sim(SceneConfig(plan=plan, noise_sigma_db=0.0))
    band = plan.band("N78-3437")
    sim.instr.set_preamp(True)
    r = adjust_ref_level_scale_div(sim.instr, adjust_settings(band, P), band, P, True, plan.noise_floor, sim.clock)
    assert r.ref_level == math.ceil(-97.0) + 10
    assert r.scale_div * P.y_ticks == pytest.approx(abs(r.ref_level - (-97.0)))


# --- pre-amplifier ----------------------------------------------------------------


def test_preamp_stays_off_above_threshold(plan):
    band = plan.band("B3-DL")
    instr = FakeInstrument([-50.0])
    last = AdjustResult(-40.0, 5.5, False)
    assert preamp_management(instr, band, P, last, plan.noise_floor, instr.clock) is last
    assert instr.calls == []


def test_preamp_enabled_below_threshold(plan):
    band = plan.band("B3-DL")
    instr = FakeInstrument([-60.3])
    last = AdjustResult(-50.0, 4.5, False)
    r = preamp_management(instr, band, P, last, plan.noise_floor, instr.clock)
    assert r.preamp and instr.preamp
    assert r.ref_level == -50.0
    assert r.scale_div == pytest.approx(abs(-50.0 + 107.0) / 10)


def test_preamp_reverted_when_gain_lifts_reference(plan):
    band = plan.band("B3-DL")
    instr = FakeInstrument([-55.2])  # with gain the peak reads higher: ref -45
    last = AdjustResult(-50.0, 4.5, False)
    r = preamp_management(instr, band, P, last, plan.noise_floor, instr.clock)
    assert not r.preamp and not instr.preamp
    i = instr.calls.index(("preamp", False))
    assert instr.calls[i + 1:i + 3] == [("ref", -50.0), ("scale", 4.5)]


@pytest.mark.parametrize("kind", ["preamp_rejects", "over_range_with_preamp"])
def test_preamp_rejection_reverts(plan, kind):
    band = plan.band("B3-DL")
    instr = FakeInstrument([-60.0], **{kind: True})
    r = preamp_management(instr, band, P, AdjustResult(-50.0, 4.5, False), plan.noise_floor, instr.clock)
    assert not r.preamp and not instr.preamp
    assert r.ref_level == -50.0


# --- narrow band ----------------------------------------------------------------


def test_nar_band_meas_samples_and_timing(plan):
    band = plan.band("B3-DL")
    instr = FakeInstrument(channel_power=-60.0)
    s = nar_band_meas(instr, environmental_settings(band, P, -40.0, 5.5), band, P, instr.clock, Source.RBS_ENV)
    assert len(s.samples) == 12 and s.values == [-60.0] * 12
    assert instr.clock.now() == pytest.approx(6.0)
    assert s.samples[-1][0] == pytest.approx(5.5)


def test_nar_band_meas_single_sample(plan):
    band = plan.band("B3-DL")
    instr = FakeInstrument()
    s = nar_band_meas(instr, environmental_settings(band, P, -40.0, 5.5), band, replace(P, n_samples=1), instr.clock,
                      Source.RBS_ENV)
    assert len(s.samples) == 1


def test_nar_band_meas_partial(plan):
    band = plan.band("B3-DL")
    instr = FakeInstrument(fail_after=4)
    with pytest.raises(PartialSeriesError) as exc:
        nar_band_meas(instr, environmental_settings(band, P, -40.0, 5.5), band, P, instr.clock, Source.RBS_ENV)
    assert len(exc.value.samples) == 4


def test_nar_band_meas_field_units_match_scene(make_sim, plan):
    sim = make_sim(SceneConfig(plan=plan, emitters=(Emitter("B3-UL", Role.UE, -20.0),), antenna_target="UE"))
    from emf_exposure.engine.params import active_settings

    band = plan.band("B3-UL")
    s = nar_band_meas(sim.instr, active_settings(band, P), band, P, sim.clock, Source.UE_ACTIVE)
    assert s.unit is Unit.VPM
    expected = convert(convert(-20.0, Unit.DBM_M2, Unit.WPM2) + convert(-95.0, Unit.DBM_M2, Unit.WPM2), Unit.WPM2, Unit.VPM)
    mean = sum(s.values) / len(s.values)
    assert mean == pytest.approx(expected, rel=0.01)


# --- band selection ---------------------------------------------------------------

GRID = trace_grid(791_000_000, 3_620_000_000, 1001)


def _floor_values(plan):
    # twice the noise-equivalent field, so increases are judged against the reading itself
    return [convert(plan.min_level(plan.find_band(f).id, False), Unit.DBM_M2, Unit.VPM) * 2.0
            if plan.find_band(f) else 1e-5 for f in GRID]


def _bump(values, plan, band_id, factor=3.0):
    b = plan.band(band_id)
    return [v * factor if b.contains(f) else v for f, v in zip(GRID, values)]


def test_selection_uplink_pulls_its_pair(plan):
    base = _floor_values(plan)
    span2 = _bump(base, plan, "B3-UL")
    assert sel_band_use(make_trace(GRID, base), make_trace(GRID, span2), plan, 30.0) == ["B3-UL", "B3-DL"]


def test_selection_tdd_has_no_pair(plan):
    base = _floor_values(plan)
    span2 = _bump(base, plan, "N78-3600")
    assert sel_band_use(make_trace(GRID, base), make_trace(GRID, span2), plan, 30.0) == ["N78-3600"]


def test_selection_identical_spans_is_empty(plan):
    base = _floor_values(plan)
    assert sel_band_use(make_trace(GRID, base), make_trace(GRID, base), plan, 30.0) == []


def test_selection_ignores_guard_gaps(plan):
    base = _floor_values(plan)
    span2 = [v * 10 if plan.find_band(f) is None else v for f, v in zip(GRID, base)]
    assert sel_band_use(make_trace(GRID, base), make_trace(GRID, span2), plan, 30.0) == []


def test_selection_grid_mismatch(plan):
    base = _floor_values(plan)
    other = trace_grid(791_000_000, 3_620_000_000, 501)
    with pytest.raises(GridMismatchError):
        sel_band_use(make_trace(GRID, base), make_trace(other, base[:501]), plan, 30.0)


def test_selection_per_band_peak_mode(plan):
    base = _floor_values(plan)
    span2 = _bump(base, plan, "B7-UL")
    assert sel_band_use(make_trace(GRID, base), make_trace(GRID, span2), plan, 30.0, per_band_peak=True) == ["B7-UL", "B7-DL"]


def test_incr_percent_floor():
    assert incr_percent(2.0, 1.0, 0.1) == 100.0
    assert incr_percent(2.0, 0.0, 0.5) == 400.0


values = st.lists(st.floats(min_value=1e-6, max_value=10.0), min_size=len(GRID), max_size=len(GRID))


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_selection_monotone(plan, data):
    rng_idx = data.draw(st.integers(0, len(GRID) - 1))
    factor = data.draw(st.floats(1.0, 100.0))
    base = _floor_values(plan)
    span2 = _bump(base, plan, data.draw(st.sampled_from(["B3-UL", "B20-DL", "N78-3437", "B38"])), 1.5)
    before = set(sel_band_use(make_trace(GRID, base), make_trace(GRID, span2), plan, 30.0))
    raised = list(span2)
    raised[rng_idx] *= factor
    after = set(sel_band_use(make_trace(GRID, base), make_trace(GRID, raised), plan, 30.0))
    assert before <= after


# --- phases ------------------------------------------------------------------------


def test_run_p1_single_band_timing(make_sim, plan):
    sim = make_sim(SceneConfig(plan=plan, emitters=(Emitter("B3-DL", Role.RBS, -40.0),)))
    series = run_p1(sim.instr, sub_plan(plan, ["B3-DL"]), P)
    assert [s.band_id for s in series] == ["B3-DL"]
    assert sim.clock.now() >= 21.0
    assert series[0].unit is Unit.DBM_M2 and len(series[0].samples) == 12


def test_run_p1_only_5g_pilot(make_sim, plan):
    sim = make_sim(SceneConfig(plan=plan, emitters=(Emitter("N78-3537", Role.RBS, -45.0),)))
    series = {s.band_id: s for s in run_p1(sim.instr, plan, P)}
    assert len(series) == 9
    for bid, s in series.items():
        mean = sum(s.values) / len(s.values)
        if bid == "N78-3537":
            assert mean == pytest.approx(-45.0, abs=0.3)
        else:
            # weak bands go through the pre-amplifier; they read the lowered floor
            assert mean == pytest.approx(plan.min_level(bid, True), abs=0.3)


def test_run_p1_degenerate_band_recorded_at_floor(plan):
    instr = FakeInstrument([-200.0])
    notes = []
    series = run_p1(instr, sub_plan(plan, ["B3-DL", "B7-DL"]), P, notes=notes)
    assert [s.values[0] for s in series] == [-95.0, -90.0]
    assert len(notes) == 2


def test_run_p1_declined(plan):
    with pytest.raises(OperatorDeclined):
        run_p1(FakeInstrument([-50.0]), plan, P, ScriptedOperator({"M1": False}))


def _active_scene(plan, **kw):
    emitters = kw.pop("emitters", (
        Emitter("B3-UL", Role.UE, -20.0, 1.0),
        Emitter("N78-3600", Role.UE, -18.0, 1.0),
        Emitter("B3-DL", Role.RBS, -30.0, 0.5),
        Emitter("N78-3600", Role.RBS, -30.0, 0.5),
    ))
    return SceneConfig(plan=plan, emitters=emitters, antenna_target="UE", **kw)


def _traffic(sim, **kw):
    return TrafficController(SimulatedLink(sim.scene, sim.clock, **kw))


def test_run_p2_selects_and_measures_uplink_side(make_sim, plan):
    sim = make_sim(_active_scene(plan))
    selected, series, session = run_p2(sim.instr, _traffic(sim), plan, P)
    assert selected == ["B3-UL", "B3-DL", "N78-3600"]
    assert [s.band_id for s in series] == ["B3-UL", "N78-3600"]
    assert all(s.source is Source.UE_ACTIVE and s.unit is Unit.VPM for s in series)
    assert session.running


def test_run_p2_no_traffic_is_empty_selection(make_sim, plan):
    sim = make_sim(_active_scene(plan))
    with pytest.raises(EmptySelectionError):
        run_p2(sim.instr, _traffic(sim, link_up=False), plan, P)


def test_run_p2_carrier_aggregation(make_sim, plan):
    sim = make_sim(_active_scene(plan, emitters=(Emitter("B3-UL", Role.UE, -20.0, 1.0), Emitter("B1-UL", Role.UE, -22.0, 1.0))))
    selected, series, _ = run_p2(sim.instr, _traffic(sim), plan, P)
    assert selected == ["B3-UL", "B3-DL", "B1-UL", "B1-DL"]
    assert [s.band_id for s in series] == ["B3-UL", "B1-UL"]


def test_run_p3_downlink_side_then_stops_traffic(make_sim, plan):
    sim = make_sim(_active_scene(plan))
    controller = _traffic(sim)
    selected, _, session = run_p2(sim.instr, controller, plan, P)
    sim.scene.point_antenna("RBS")
    series = run_p3(sim.instr, controller, session, selected, plan, P)
    assert [s.band_id for s in series] == ["B3-DL", "N78-3600"]
    assert all(s.source is Source.RBS_ACTIVE for s in series)
    assert session.state.value == "STOPPED"
    assert not sim.scene.traffic_active


def test_run_p3_empty_selection(make_sim, plan):
    sim = make_sim(_active_scene(plan))
    controller = _traffic(sim)
    session = controller.start(TrafficSpec())
    assert run_p3(sim.instr, controller, session, [], plan, P) == []
    assert not session.running


def test_run_p3_stale_traffic(make_sim, plan):
    sim = make_sim(_active_scene(plan))
    controller = _traffic(sim)
    # the transfer outlives the scans and P2 but not the M3 hand-off
    params = replace(P, iperf_duration=5.0)
    selected, _, session = run_p2(sim.instr, controller, plan, params)
    chp_before = sum(1 for e in sim.instr.transcript if e.line.startswith("MEAS:CHP?"))
    with pytest.raises(StaleTrafficError):
        run_p3(sim.instr, controller, session, selected, plan, params)
    assert sum(1 for e in sim.instr.transcript if e.line.startswith("MEAS:CHP?")) == chp_before


def test_no_channel_power_outside_selection(make_sim, plan):
    sim = make_sim(_active_scene(plan))
    controller = _traffic(sim)
    selected, _, session = run_p2(sim.instr, controller, plan, P)
    run_p3(sim.instr, controller, session, selected, plan, P)
    queried = set()
    for e in sim.instr.transcript:
        if e.line.startswith("MEAS:CHP?"):
            _, lo, hi = e.line.split()
            queried.add(plan.find_band(int(lo)).id)
    assert queried == set(selected)


# --- params --------------------------------------------------------------------


def test_params_defaults():
    assert (P.safety_margin, P.max_time_search, P.y_ticks, P.adjust_iterations) == (10.0, 5, 10, 3)
    assert (P.preamp_threshold, P.n_samples, P.int_sample_time, P.thre_inc) == (-48.77, 12, 0.5, 30.0)
    assert P.wide_span[0].mhz == 791 and P.wide_span[1].mhz == 3620
    assert (P.ref_level_active, P.iperf_duration, P.avg_samples) == (6.0, 120.0, 100)


def test_params_file(tmp_path):
    path = tmp_path / "p.yaml"
    path.write_text("thre_inc: 50\nn_samples: 4\n")
    p = load_params(path)
    assert p.thre_inc == 50.0 and p.n_samples == 4
    with pytest.raises(ConfigError):
        params_from_dict({"thre_incr": 50})
    with pytest.raises(ConfigError):
        params_from_dict({"adjust_iterations": 0})


# --- golden transcript ---------------------------------------------------------

GOLDEN = __import__("pathlib").Path(__file__).parent / "golden" / "p1_b3dl.scpi.log"


def test_p1_transcript_matches_golden(make_sim, plan):
    """Command order and values of P1 over one band; regenerate with EMF_REGEN_GOLDEN=1."""
    import os

    sim = make_sim(SceneConfig(plan=plan, emitters=(Emitter("B3-DL", Role.RBS, -40.0),), rng_seed=7))
    run_p1(sim.instr, sub_plan(plan, ["B3-DL"]), P)
    text = "".join(e.format() + "\n" for e in sim.instr.transcript)
    if os.environ.get("EMF_REGEN_GOLDEN"):
        GOLDEN.write_text(text)
    assert text == GOLDEN.read_text()
