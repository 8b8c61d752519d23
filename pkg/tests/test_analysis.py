import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import curve_fit

from emf_exposure.analysis import (
    REFERENCE_PARAMS,
    ExposureBreakdown,
    FitParams,
    aggregate_session,
    analyze,
    band_occurrence,
    confidence_interval,
    estimate_cost,
    estimate_exposure,
    exposure_per_mbps,
    far_field_distance,
    fit_double_exponential,
    ue_share,
)
from emf_exposure.analysis.stats import z_value
from emf_exposure.errors import DomainError, FitFailed, InsufficientDataError
from emf_exposure.model import ExposureSeries, Session, Source
from emf_exposure.units import FREE_SPACE_IMPEDANCE, Frequency, Unit, convert


def series(band, unit, values, source):
    return ExposureSeries(band, unit, tuple((0.5 * k, v) for k, v in enumerate(values)), source)


# --- far field -------------------------------------------------------------------


def test_far_field_is_max_of_three_terms():
    lam = 299_792_458.0 / 3.5e9
    assert far_field_distance(3.5e9, 0.08) == pytest.approx(max(lam, 0.08, 2 * 0.0064 / lam))
    assert far_field_distance(Frequency.from_mhz(800), 0.08) == pytest.approx(299_792_458.0 / 800e6)
    # electrically large antenna: the 2L^2/lambda term rules
    assert far_field_distance(3.5e9, 0.5) == pytest.approx(2 * 0.25 / lam)


@pytest.mark.parametrize("f,l", [(0, 0.08), (-1e9, 0.08), (1e9, -0.1)])
def test_far_field_domain(f, l):
    with pytest.raises(ValueError):
        far_field_distance(f, l)


@given(st.floats(1e8, 1e11), st.floats(0.0, 1.0))
def test_far_field_bounds(f, l):
    d = far_field_distance(f, l)
    assert d >= l and d >= 299_792_458.0 / f * (1 - 1e-12)


# --- statistics ------------------------------------------------------------------


def test_confidence_interval_example():
    mean, h = confidence_interval([1, 2, 3, 4, 5])
    assert mean == 3.0
    assert h == pytest.approx(1.959964 * math.sqrt(2.5) / math.sqrt(5))


def test_confidence_interval_needs_two_samples():
    with pytest.raises(InsufficientDataError):
        confidence_interval([1.0])


def test_z_value_other_levels():
    assert z_value(0.99) == pytest.approx(2.5758, abs=1e-4)
    with pytest.raises(ValueError):
        z_value(1.0)


# --- breakdown -------------------------------------------------------------------


def _session(plan, p1=(), p2=(), p3=(), thr=()):
    return Session("x", True, 100.0, phase1=tuple(p1), phase2=tuple(p2), phase3=tuple(p3),
                   selected_bands=tuple({s.band_id for s in (*p2, *p3)}), throughput_log=tuple(thr))


def test_aggregate_env_density(plan):
    s = _session(plan, p1=[series("B3-DL", Unit.DBM_M2, [-60.0] * 12, Source.RBS_ENV)])
    b = aggregate_session(s, plan)
    assert b.rbs_env == pytest.approx(1e-9)
    assert b.ci_halfwidth["rbs_env"] == 0.0
    assert b.total_field == pytest.approx(math.sqrt(1e-9 * FREE_SPACE_IMPEDANCE))


def test_aggregate_splits_5g_uplink(plan):
    s = _session(plan, p2=[series("B3-UL", Unit.VPM, [0.2] * 4, Source.UE_ACTIVE),
                           series("N78-3600", Unit.VPM, [0.4] * 4, Source.UE_ACTIVE)],
                 p3=[series("B3-DL", Unit.VPM, [0.1] * 4, Source.RBS_ACTIVE)])
    b = aggregate_session(s, plan)
    assert b.ue_active_pre5g == pytest.approx(0.04 / FREE_SPACE_IMPEDANCE)
    assert b.ue_active_5g == pytest.approx(0.16 / FREE_SPACE_IMPEDANCE)
    assert b.rbs_active == pytest.approx(0.01 / FREE_SPACE_IMPEDANCE)
    assert ue_share(b) == pytest.approx(100 * 0.20 / 0.21)


def test_aggregate_rejects_wrong_units(plan):
    with pytest.raises(DomainError):
        aggregate_session(_session(plan, p1=[series("B3-DL", Unit.VPM, [0.1], Source.RBS_ENV)]), plan)


def test_component_ci_in_quadrature(plan):
    s1 = series("B3-UL", Unit.VPM, [0.1, 0.2, 0.3], Source.UE_ACTIVE)
    s2 = series("B1-UL", Unit.VPM, [0.3, 0.3, 0.5], Source.UE_ACTIVE)
    b = aggregate_session(_session(plan, p2=[s1, s2]), plan)

    def hw(vals):
        m, h = confidence_interval(vals)
        lo = max(m - h, 0.0)
        return ((m + h) ** 2 - lo ** 2) / FREE_SPACE_IMPEDANCE / 2

    assert b.ci_halfwidth["ue_active_pre5g"] == pytest.approx(math.hypot(hw(s1.values), hw(s2.values)))


def test_ue_share_zero_total():
    with pytest.raises(DomainError):
        ue_share(ExposureBreakdown())


@given(*[st.floats(0, 1e-3) for _ in range(4)])
def test_ue_share_bounds(a, b, c, d):
    br = ExposureBreakdown(a, b, c, d)
    if br.total > 0:
        assert 0.0 <= ue_share(br) <= 100.0 + 1e-9


def test_negative_component_rejected():
    with pytest.raises(DomainError):
        ExposureBreakdown(rbs_env=-1.0)


def test_exposure_per_mbps():
    assert exposure_per_mbps(2.0, 4.0) == 0.5
    with pytest.raises(DomainError):
        exposure_per_mbps(2.0, 0.0)


def test_band_occurrence_counts_sessions(plan):
    a = Session("a", True, 1, selected_bands=("B3-UL", "B3-DL"))
    b = Session("b", True, 1, selected_bands=("B3-UL", "N78-3600"))
    assert band_occurrence([a, b, Session("c", False, 1)]) == {"B3-UL": 2, "B3-DL": 1, "N78-3600": 1}


# --- estimator and fit ---------------------------------------------------------------


def test_estimate_cost_values():
    assert estimate_cost(0) == pytest.approx(1.2764, abs=1e-12)
    assert 0.029 <= estimate_cost(45) <= 0.032
    assert estimate_exposure(10) == pytest.approx(10 * estimate_cost(10))
    with pytest.raises(DomainError):
        estimate_cost(-1)


def test_fit_params_normalized_and_finite():
    assert FitParams(0.1, -0.01, 1.0, -0.5).normalized() == FitParams(1.0, -0.5, 0.1, -0.01)
    with pytest.raises(DomainError):
        FitParams(math.nan, 0, 0, 0)


def _samples(params=REFERENCE_PARAMS, n=26, noise=0.0, seed=0):
    t = np.linspace(1, 50, n)
    y = np.array([estimate_cost(x, params) for x in t])
    if noise:
        y = y * (1 + noise * np.random.default_rng(seed).normal(size=n))
    return list(zip(t, y))


def test_fit_recovers_noise_free():
    fit = fit_double_exponential(_samples())
    assert fit.converged
    np.testing.assert_allclose(fit.params.as_array(), REFERENCE_PARAMS.as_array(), rtol=1e-4)


@pytest.mark.parametrize("weighting", ["relative", "absolute"])
def test_fit_matches_scipy_oracle(weighting):
    pts = _samples(noise=0.01, seed=4)
    t, y = np.array(pts).T
    fit = fit_double_exponential(pts, weighting=weighting)

    def model(x, f1, e1, f2, e2):
        return f1 * np.exp(e1 * x) + f2 * np.exp(e2 * x)

    sigma = y if weighting == "relative" else None
    ref, _ = curve_fit(model, t, y, p0=REFERENCE_PARAMS.as_array(), sigma=sigma, maxfev=20000)
    ref = FitParams(*ref).normalized()

    def cost(p):
        r = (model(t, *p) - y) / (y if weighting == "relative" else 1)
        return float(r @ r)

    # at least as good as scipy started from the truth
    assert cost(fit.params.as_array()) <= cost(ref.as_array()) * (1 + 1e-9)
    np.testing.assert_allclose(fit.params.as_array(), ref.as_array(), rtol=1e-3)


def test_fit_rejects_three_points():
    with pytest.raises(InsufficientDataError):
        fit_double_exponential(_samples(n=3))


def test_fit_rejects_duplicate_abscissae():
    pts = _samples(n=5)
    with pytest.raises(DomainError):
        fit_double_exponential(pts + [pts[0]])


def test_fit_unknown_weighting():
    with pytest.raises(ValueError):
        fit_double_exponential(_samples(), weighting="huber")


def test_fit_failure_carries_best_iterate():
    with pytest.raises(FitFailed) as exc:
        fit_double_exponential(_samples(noise=0.01), max_iter=1)
    assert exc.value.best is not None


# --- report --------------------------------------------------------------------------


def _active_session(plan, label, thr, ue_vpm):
    return Session(
        label, True, 50.0,
        phase1=(series("B3-DL", Unit.DBM_M2, [-50.0] * 3, Source.RBS_ENV),),
        selected_bands=("B3-UL", "B3-DL"),
        phase2=(series("B3-UL", Unit.VPM, [ue_vpm] * 3, Source.UE_ACTIVE),),
        phase3=(series("B3-DL", Unit.VPM, [0.05] * 3, Source.RBS_ACTIVE),),
        throughput_log=((1.0, thr), (2.0, thr)),
    )


def test_report_single_session_skips_fit(plan):
    report = analyze([_active_session(plan, "a", 10.0, 0.5)], plan)
    assert report.fit is None and "fit skipped" in report.notes[0]
    row = report.rows[0]
    assert row.cost == pytest.approx(row.breakdown.total_field / 10.0)
    assert report.occurrence == {"B3-UL": 1, "B3-DL": 1}


def test_report_csv_and_json(plan):
    sessions = [_active_session(plan, f"s{k}", 5.0 * (k + 1), 1.0 / (k + 1)) for k in range(5)]
    report = analyze(sessions, plan)
    lines = report.to_csv().splitlines()
    assert lines[0] == "location,distance_m,los,throughput_mbps,total_field_vpm,cost_vpm_per_mbps,ue_share_pct"
    assert len(lines) == 6 and lines[1].startswith("s0,50.0,1,5.0,")
    d = report.to_dict()
    assert d["fit"] is not None and len(d["sessions"]) == 5
    assert report.to_json() == report.to_json()


def test_report_session_without_traffic(plan):
    s = Session("quiet", False, 10.0, phase1=(series("B3-DL", Unit.DBM_M2, [-60.0] * 2, Source.RBS_ENV),))
    row = analyze([s], plan).rows[0]
    assert row.throughput is None and row.cost is None and row.ue_share == 0.0
