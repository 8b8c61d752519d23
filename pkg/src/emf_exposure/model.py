"""Domain model: band plans, noise-floor table, traces, exposure series, sessions."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

from .units import Frequency, FieldStrength, Unit


class Duplex(str, enum.Enum):
    FDD_UL = "FDD_UL"
    FDD_DL = "FDD_DL"
    TDD = "TDD"


class Generation(str, enum.Enum):
    PRE5G = "PRE5G"
    NR = "NR"


class Source(str, enum.Enum):
    RBS_ENV = "RBS_ENV"
    UE_ACTIVE = "UE_ACTIVE"
    RBS_ACTIVE = "RBS_ACTIVE"


class Direction(str, enum.Enum):
    UL = "UL"
    DL = "DL"


UPLINK_SIDE = frozenset({Duplex.FDD_UL, Duplex.TDD})
DOWNLINK_SIDE = frozenset({Duplex.FDD_DL, Duplex.TDD})


@dataclass(frozen=True)
class Band:
    id: str
    label: str
    f_start: Frequency
    f_stop: Frequency
    duplex: Duplex
    generation: Generation
    paired_band: str | None = None

    def __post_init__(self):
        if not self.f_start < self.f_stop:
            raise ValueError(f"band {self.id}: f_start must be below f_stop")

    @property
    def width_hz(self) -> int:
        return self.f_stop.hertz - self.f_start.hertz

    @property
    def center_hz(self) -> float:
        return (self.f_start.hertz + self.f_stop.hertz) / 2

    def contains(self, hz: float) -> bool:
        return self.f_start.hertz <= hz <= self.f_stop.hertz

    def overlap_hz(self, lo: float, hi: float) -> float:
        return max(0.0, min(hi, self.f_stop.hertz) - max(lo, self.f_start.hertz))


@dataclass(frozen=True)
class NoiseFloorRow:
    band_id: str
    level_preamp_off: float  # dBm/m^2
    level_preamp_on: float  # dBm/m^2


@dataclass(frozen=True)
class NoiseFloorTable:
    rows: tuple[NoiseFloorRow, ...]

    def row(self, band_id: str) -> NoiseFloorRow:
        for r in self.rows:
            if r.band_id == band_id:
                return r
        raise KeyError(f"no noise-floor row for band {band_id!r}")

    def min_level(self, band_id: str, preamp: bool) -> float:
        r = self.row(band_id)
        return r.level_preamp_on if preamp else r.level_preamp_off


@dataclass(frozen=True)
class Violation:
    band_id: str
    rule: str

    def __str__(self) -> str:
        return f"{self.band_id}: {self.rule}"


@dataclass(frozen=True)
class BandPlan:
    operator: str
    bands: tuple[Band, ...]
    noise_floor: NoiseFloorTable

    def band(self, band_id: str) -> Band:
        for b in self.bands:
            if b.id == band_id:
                return b
        raise KeyError(f"unknown band {band_id!r}")

    def __contains__(self, band_id: str) -> bool:
        return any(b.id == band_id for b in self.bands)

    def sorted_bands(self) -> list[Band]:
        return sorted(self.bands, key=lambda b: (b.f_start.hertz, b.f_stop.hertz))

    def find_band(self, hz: float) -> Band | None:
        """Band whose closed range contains `hz`; a shared edge goes to the lower band.

        Frequencies in guard gaps between bands map to None.
        """
        for b in self.sorted_bands():
            if b.contains(hz):
                return b
        return None

    def bands_with(self, duplexes: Iterable[Duplex]) -> list[Band]:
        wanted = set(duplexes)
        return [b for b in self.sorted_bands() if b.duplex in wanted]

    def min_level(self, band_id: str, preamp: bool) -> float:
        return self.noise_floor.min_level(band_id, preamp)


def validate_band_plan(plan: BandPlan) -> list[Violation]:
    """Check every BandPlan invariant; violations are returned, never raised."""
    out: list[Violation] = []
    ids = [b.id for b in plan.bands]
    for b in plan.bands:
        if ids.count(b.id) > 1 and b is plan.bands[ids.index(b.id)]:
            out.append(Violation(b.id, "duplicate band id"))
        if b.f_start >= b.f_stop:
            out.append(Violation(b.id, "f_start must be below f_stop"))
        if b.duplex is Duplex.TDD:
            if b.paired_band is not None:
                out.append(Violation(b.id, "TDD band must not have a pair"))
            continue
        if b.paired_band is None:
            out.append(Violation(b.id, "FDD band has no paired band"))
            continue
        if b.paired_band not in plan:
            out.append(Violation(b.id, f"paired band {b.paired_band!r} missing from plan"))
            continue
        other = plan.band(b.paired_band)
        if other.paired_band != b.id:
            out.append(Violation(b.id, f"pairing with {other.id!r} is not mutual"))
        expected = Duplex.FDD_DL if b.duplex is Duplex.FDD_UL else Duplex.FDD_UL
        if other.duplex is not expected:
            out.append(Violation(b.id, f"paired band {other.id!r} must be {expected.value}"))

    ordered = plan.sorted_bands()
    for lo, hi in zip(ordered, ordered[1:]):
        if hi.f_start.hertz < lo.f_stop.hertz:
            out.append(Violation(hi.id, f"frequency range overlaps {lo.id!r}"))

    for b in plan.bands:
        try:
            row = plan.noise_floor.row(b.id)
        except KeyError:
            out.append(Violation(b.id, "no noise-floor row"))
            continue
        if not row.level_preamp_on < row.level_preamp_off:
            out.append(Violation(b.id, "pre-amp noise floor must be below the pre-amp-off floor"))
    for row in plan.noise_floor.rows:
        if row.band_id not in plan:
            out.append(Violation(row.band_id, "noise-floor row for unknown band"))
    return out


@dataclass(frozen=True)
class SpectrumTrace:
    f_start: Frequency
    f_stop: Frequency
    points: tuple[tuple[Frequency, FieldStrength], ...]

    def __post_init__(self):
        prev = None
        for f, _ in self.points:
            if not (self.f_start.hertz <= f.hertz <= self.f_stop.hertz):
                raise ValueError(f"trace point {f} outside [{self.f_start}, {self.f_stop}]")
            if prev is not None and f.hertz <= prev:
                raise ValueError("trace point frequencies must be strictly increasing")
            prev = f.hertz

    @property
    def frequencies_hz(self) -> list[int]:
        return [f.hertz for f, _ in self.points]

    @property
    def values(self) -> list[float]:
        return [v.volts_per_meter for _, v in self.points]


@dataclass(frozen=True)
class ExposureSeries:
    band_id: str
    unit: Unit
    samples: tuple[tuple[float, float], ...]
    source: Source

    def __post_init__(self):
        if self.unit not in (Unit.VPM, Unit.DBM_M2):
            raise ValueError(f"exposure series unit must be VPM or DBM_M2, got {self.unit}")
        ts = [t for t, _ in self.samples]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("sample timestamps must be non-decreasing")

    @property
    def values(self) -> list[float]:
        return [v for _, v in self.samples]


@dataclass(frozen=True)
class SessionNote:
    phase: str
    band_id: str | None
    message: str


@dataclass(frozen=True)
class Session:
    location_label: str
    los: bool
    distance_to_rbs_m: float
    direction: Direction = Direction.UL
    phase1: tuple[ExposureSeries, ...] = ()
    selected_bands: tuple[str, ...] = ()
    phase2: tuple[ExposureSeries, ...] = ()
    phase3: tuple[ExposureSeries, ...] = ()
    throughput_log: tuple[tuple[float, float], ...] = ()
    errors: tuple[SessionNote, ...] = field(default=())

    def check(self, plan: BandPlan) -> list[str]:
        """Return the Session invariants violated against `plan`."""
        problems = []
        for s in self.phase2:
            if s.band_id not in plan or plan.band(s.band_id).duplex not in UPLINK_SIDE:
                problems.append(f"phase2 series on non-uplink band {s.band_id}")
        for s in self.phase3:
            if s.band_id not in plan or plan.band(s.band_id).duplex not in DOWNLINK_SIDE:
                problems.append(f"phase3 series on non-downlink band {s.band_id}")
        for b in self.selected_bands:
            if b not in plan:
                problems.append(f"selected band {b} not in plan")
        return problems
