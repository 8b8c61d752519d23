"""Per-session exposure breakdown into RBS/UE, environmental/active and pre-5G/5G parts.

Bands combine additively in power density. Each series' confidence interval
is computed in the series' own unit and mapped through the conversion to
W/m^2; component intervals combine in quadrature.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from ..errors import DomainError
from ..model import BandPlan, ExposureSeries, Generation, Session
from ..units import FREE_SPACE_IMPEDANCE, Unit, convert
from .stats import confidence_interval

COMPONENTS = ("rbs_env", "ue_active_pre5g", "ue_active_5g", "rbs_active")


@dataclass(frozen=True)
class ExposureBreakdown:
    rbs_env: float = 0.0  # W/m^2
    ue_active_pre5g: float = 0.0
    ue_active_5g: float = 0.0
    rbs_active: float = 0.0
    ci_halfwidth: Mapping[str, float] = field(default_factory=lambda: dict.fromkeys(COMPONENTS, 0.0))

    def __post_init__(self):
        for name in COMPONENTS:
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")

    @property
    def ue_active(self) -> float:
        return self.ue_active_pre5g + self.ue_active_5g

    @property
    def total(self) -> float:
        return self.rbs_env + self.ue_active_pre5g + self.ue_active_5g + self.rbs_active

    @property
    def total_field(self) -> float:
        """Total exposure as an equivalent field strength, V/m."""
        return math.sqrt(self.total * FREE_SPACE_IMPEDANCE)

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in COMPONENTS}


def series_density(series: ExposureSeries) -> tuple[float, float]:
    """(mean, CI half-width) of one series, both in W/m^2."""
    values = series.values
    if not values:
        return 0.0, 0.0
    if len(values) >= 2:
        mean, h = confidence_interval(values)
    else:
        mean, h = values[0], 0.0
    lo = mean - h
    if series.unit is Unit.VPM:
        lo = max(lo, 0.0)
    mean_w = convert(mean, series.unit, Unit.WPM2)
    hw = (convert(mean + h, series.unit, Unit.WPM2) - convert(lo, series.unit, Unit.WPM2)) / 2.0
    return mean_w, max(hw, 0.0)


def _component(series: Iterable[ExposureSeries], unit: Unit, phase: str) -> tuple[float, float]:
    total, var = 0.0, 0.0
    for s in series:
        if s.unit is not unit:
            raise DomainError(f"{phase} series {s.band_id} is in {s.unit.value}, expected {unit.value}")
        m, h = series_density(s)
        total += m
        var += h * h
    return total, math.sqrt(var)


def aggregate_session(session: Session, plan: BandPlan) -> ExposureBreakdown:
    env, env_h = _component(session.phase1, Unit.DBM_M2, "P1")
    is_5g = [plan.band(s.band_id).generation is Generation.NR for s in session.phase2]
    pre, pre_h = _component([s for s, g in zip(session.phase2, is_5g) if not g], Unit.VPM, "P2")
    nr, nr_h = _component([s for s, g in zip(session.phase2, is_5g) if g], Unit.VPM, "P2")
    act, act_h = _component(session.phase3, Unit.VPM, "P3")
    return ExposureBreakdown(
        rbs_env=env,
        ue_active_pre5g=pre,
        ue_active_5g=nr,
        rbs_active=act,
        ci_halfwidth={"rbs_env": env_h, "ue_active_pre5g": pre_h, "ue_active_5g": nr_h, "rbs_active": act_h},
    )


def ue_share(breakdown: ExposureBreakdown) -> float:
    """Percentage of the total exposure coming from the smartphone."""
    total = breakdown.total
    if total <= 0:
        raise DomainError("ue share undefined for a zero total")
    return 100.0 * breakdown.ue_active / total


def exposure_per_mbps(total_field: float, throughput: float) -> float:
    if throughput <= 0:
        raise DomainError("exposure per Mbps undefined for non-positive throughput")
    if total_field < 0:
        raise DomainError("field strength must be >= 0")
    return total_field / throughput


def mean_throughput(session: Session) -> float | None:
    rates = [r for _, r in session.throughput_log]
    return sum(rates) / len(rates) if rates else None


def band_occurrence(sessions: Iterable[Session]) -> dict[str, int]:
    counts: Counter[str] = Counter()
    for s in sessions:
        counts.update(set(s.selected_bands))
    return dict(counts)
