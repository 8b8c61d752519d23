"""Corpus-level report: breakdowns, shares, exposure per Mbps, fit and band occurrence."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

from ..errors import ExposureError
from ..model import BandPlan, Session
from .breakdown import ExposureBreakdown, aggregate_session, band_occurrence, exposure_per_mbps, mean_throughput, ue_share
from .fitting import FitResult, fit_double_exponential

MIN_FIT_POINTS = 4
CSV_COLUMNS = ("location", "distance_m", "los", "throughput_mbps", "total_field_vpm", "cost_vpm_per_mbps", "ue_share_pct")


@dataclass(frozen=True)
class SessionRow:
    location: str
    distance_m: float
    los: bool
    breakdown: ExposureBreakdown
    throughput: float | None
    ue_share: float | None
    cost: float | None


@dataclass
class AnalysisReport:
    rows: list[SessionRow]
    occurrence: dict[str, int]
    fit: FitResult | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "sessions": [
                {
                    "location": r.location,
                    "distance_m": r.distance_m,
                    "los": r.los,
                    "breakdown_w_m2": r.breakdown.as_dict(),
                    "ci_halfwidth_w_m2": dict(r.breakdown.ci_halfwidth),
                    "total_w_m2": r.breakdown.total,
                    "total_field_vpm": r.breakdown.total_field,
                    "throughput_mbps": r.throughput,
                    "ue_share_pct": r.ue_share,
                    "cost_vpm_per_mbps": r.cost,
                }
                for r in self.rows
            ],
            "band_occurrence": dict(sorted(self.occurrence.items())),
            "fit": None,
            "notes": list(self.notes),
        }
        if self.fit is not None:
            p = self.fit.params
            out["fit"] = {
                "f1": p.f1, "e1": p.e1, "f2": p.f2, "e2": p.e2,
                "residual_norm": self.fit.residual_norm,
                "iterations": self.fit.iterations,
            }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([
                r.location, r.distance_m, int(r.los),
                "" if r.throughput is None else repr(r.throughput),
                repr(r.breakdown.total_field),
                "" if r.cost is None else repr(r.cost),
                "" if r.ue_share is None else repr(r.ue_share),
            ])
        return buf.getvalue()


def session_row(session: Session, plan: BandPlan) -> SessionRow:
    b = aggregate_session(session, plan)
    thr = mean_throughput(session)
    share = ue_share(b) if b.total > 0 else None
    cost = exposure_per_mbps(b.total_field, thr) if thr and thr > 0 else None
    return SessionRow(session.location_label, session.distance_to_rbs_m, session.los, b, thr, share, cost)


def analyze(sessions: list[Session], plan: BandPlan) -> AnalysisReport:
    rows = [session_row(s, plan) for s in sessions]
    report = AnalysisReport(rows, band_occurrence(sessions))
    # one point per throughput value; repeated throughputs are averaged
    by_t: dict[float, list[float]] = {}
    for r in rows:
        if r.cost is not None and r.cost > 0:
            by_t.setdefault(r.throughput, []).append(r.cost)
    points = [(t, sum(cs) / len(cs)) for t, cs in sorted(by_t.items())]
    if len(points) < MIN_FIT_POINTS:
        report.notes.append(f"fit skipped: {len(points)} usable point(s), need {MIN_FIT_POINTS}")
        return report
    try:
        report.fit = fit_double_exponential(points)
    except ExposureError as exc:
        report.notes.append(f"fit failed: {exc}")
    return report
