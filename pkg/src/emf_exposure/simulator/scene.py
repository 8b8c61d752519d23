"""Synthetic RF world behind the simulated spectrum analyzer.

Emitters are flat-PSD sources occupying one plan band each; their
`base_density` is the band-integrated density at the virtual measurement
point. The noise floor is the measured pre-amp-off/on level of each band,
spread flat over the band (guard gaps borrow the PSD of the nearest band).

The UE transmit-power/traffic law is a stand-in: traffic-coupled emission
scales linearly with the realized rate relative to the link capacity, and
the non-dominant direction only carries an acknowledgment share.
"""

from __future__ import annotations

import enum
import math
import os
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from ..clock import Clock, SimulatedClock
from ..errors import ConfigError
from ..model import BandPlan, Direction
from ..scpi.dialect import TypeDetector
from ..storage import default_plan, load_plan
from ..units import Unit, convert, dbm_m2_to_w_m2, w_m2_to_dbm_m2

FREQ_MIN_HZ = 700_000_000
FREQ_MAX_HZ = 4_000_000_000


class Role(str, enum.Enum):
    RBS = "RBS"
    UE = "UE"


class PsdShape(str, enum.Enum):
    FLAT = "FLAT"


@dataclass(frozen=True)
class Emitter:
    band_id: str
    role: Role
    base_density: float  # dBm/m^2, band-integrated
    traffic_coupling: float = 0.0
    psd_shape: PsdShape = PsdShape.FLAT

    def __post_init__(self):
        if not 0.0 <= self.traffic_coupling <= 1.0:
            raise ValueError(f"traffic_coupling must be in [0, 1], got {self.traffic_coupling}")
        if not math.isfinite(self.base_density):
            raise ValueError("base_density must be finite")


@dataclass(frozen=True)
class Location:
    label: str = "sim"
    los: bool = True
    distance_to_rbs_m: float = 0.0


@dataclass(frozen=True)
class TrafficState:
    active: bool = False
    direction: Direction = Direction.UL
    rate_mbps: float = 0.0
    until: float | None = None  # clock time at which the transfer ends


@dataclass(frozen=True)
class SceneConfig:
    """Static description of a scene, as stored in a scene file."""

    plan: BandPlan
    emitters: tuple[Emitter, ...] = ()
    antenna_target: Role = Role.RBS
    front_to_back_db: float = 20.0
    preamp_gain_db: float = 20.0
    adc_max: float = -30.0  # dBm/m^2 at the ADC, i.e. after pre-amp gain
    noise_sigma_db: float = 0.3
    rng_seed: int = 0
    ul_capacity_mbps: float = 60.0
    dl_capacity_mbps: float = 150.0
    ack_ratio: float = 0.1
    trace_points: int = 1001
    max_ref_level: float = 80.0  # dBm/m^2
    location: Location = field(default_factory=Location)
    plan_file: str | None = None

    def __post_init__(self):
        if not self.front_to_back_db > 0:
            raise ValueError("front_to_back_db must be positive")
        if self.noise_sigma_db < 0:
            raise ValueError("noise_sigma_db must be >= 0")
        for e in self.emitters:
            if e.band_id not in self.plan:
                raise ValueError(f"emitter references unknown band {e.band_id!r}")
        if self.ul_capacity_mbps <= 0 or self.dl_capacity_mbps <= 0:
            raise ValueError("link capacities must be positive")
        if not 0 <= self.ack_ratio <= 1:
            raise ValueError("ack_ratio must be in [0, 1]")
        if self.trace_points < 2:
            raise ValueError("trace_points must be >= 2")


class Scene:
    """Mutable runtime state around a SceneConfig; safe to mutate from a control thread."""

    def __init__(self, config: SceneConfig, clock: Clock | None = None):
        self.config = config
        self.clock = clock or SimulatedClock()
        self._lock = threading.RLock()
        self._emitters = list(config.emitters)
        self.antenna_target = Role(config.antenna_target)
        self._traffic = TrafficState()
        self._noise_segments = _noise_segments(config.plan)

    # --- convenience accessors ---------------------------------------------

    @property
    def plan(self) -> BandPlan:
        return self.config.plan

    @property
    def emitters(self) -> list[Emitter]:
        with self._lock:
            return list(self._emitters)

    @property
    def traffic(self) -> TrafficState:
        with self._lock:
            return self._traffic

    @property
    def traffic_active(self) -> bool:
        with self._lock:
            t = self._traffic
            return t.active and (t.until is None or self.clock.now() < t.until)

    # --- mutations -----------------------------------------------------------

    def point_antenna(self, target: Role | str) -> None:
        with self._lock:
            self.antenna_target = Role(target)

    def set_traffic(
        self,
        active: bool,
        direction: Direction | str = Direction.UL,
        rate_mbps: float = 0.0,
        until: float | None = None,
    ) -> TrafficState:
        if rate_mbps < 0:
            raise ValueError("rate must be >= 0")
        with self._lock:
            self._traffic = TrafficState(bool(active), Direction(direction), float(rate_mbps), until)
            return self._traffic

    def set_emitter_density(self, index: int, base_density: float) -> None:
        with self._lock:
            self._emitters[index] = replace(self._emitters[index], base_density=float(base_density))

    def reset(self) -> None:
        with self._lock:
            self._emitters = list(self.config.emitters)
            self.antenna_target = Role(self.config.antenna_target)
            self._traffic = TrafficState()

    # --- physics -------------------------------------------------------------

    def capacity(self, direction: Direction) -> float:
        c = self.config
        return c.ul_capacity_mbps if direction is Direction.UL else c.dl_capacity_mbps

    def activity(self, role: Role) -> float:
        """Fraction of traffic-coupled emission present for `role` right now."""
        with self._lock:
            t = self._traffic
            if not t.active or (t.until is not None and self.clock.now() >= t.until):
                return 0.0
            load = min(t.rate_mbps, self.capacity(t.direction)) / self.capacity(t.direction)
            dominant = (role is Role.UE) == (t.direction is Direction.UL)
            return load if dominant else self.config.ack_ratio * load

    def emission_w(self, emitter: Emitter) -> float:
        """Band-integrated density of one emitter as seen by the antenna, W/m^2."""
        with self._lock:
            share = (1.0 - emitter.traffic_coupling) + emitter.traffic_coupling * self.activity(emitter.role)
            w = dbm_m2_to_w_m2(emitter.base_density) * share
            if emitter.role is not self.antenna_target:
                w *= 10.0 ** (-self.config.front_to_back_db / 10.0)
            return w

    def noise_w(self, f_min: float, f_max: float, preamp: bool) -> float:
        total = 0.0
        for lo, hi, psd_off, psd_on in self._noise_segments:
            ov = min(hi, f_max) - max(lo, f_min)
            if ov > 0:
                total += (psd_on if preamp else psd_off) * ov
        return total

    def noise_psd(self, hz: float, preamp: bool) -> float:
        for lo, hi, psd_off, psd_on in self._noise_segments:
            if lo <= hz <= hi:
                return psd_on if preamp else psd_off
        raise ValueError(f"{hz} Hz outside the noise model")

    def signal_w(self, f_min: float, f_max: float) -> float:
        """Emitter power integrated over [f_min, f_max] (flat PSDs, analytic)."""
        total = 0.0
        with self._lock:
            for e in self._emitters:
                band = self.plan.band(e.band_id)
                ov = band.overlap_hz(f_min, f_max)
                if ov > 0:
                    total += self.emission_w(e) * ov / band.width_hz
        return total

    def level_w(self, f_min: float, f_max: float, preamp: bool) -> float:
        with self._lock:
            return self.signal_w(f_min, f_max) + self.noise_w(f_min, f_max, preamp)

    def point_psd(self, hz: float, preamp: bool) -> float:
        """Total PSD (W/m^2/Hz) sampled at a single frequency; shared edges go to the lower band."""
        psd = self.noise_psd(hz, preamp)
        band = self.plan.find_band(hz)
        if band is None:
            return psd
        with self._lock:
            for e in self._emitters:
                if e.band_id == band.id:
                    psd += self.emission_w(e) / band.width_hz
        return psd

    def over_range(self, f_min: float, f_max: float, preamp: bool) -> bool:
        if not preamp:
            return False
        level = w_m2_to_dbm_m2(self.level_w(f_min, f_max, preamp))
        return level + self.config.preamp_gain_db > self.config.adc_max


def jitter_sigma(scene: Scene, detector: TypeDetector | None, avg_samples: int = 1) -> float:
    sigma = scene.config.noise_sigma_db
    if detector is TypeDetector.ROLLING_AVERAGE:
        sigma /= math.sqrt(max(1, avg_samples))
    return sigma


def scene_reading(
    scene: Scene,
    f_min: float,
    f_max: float,
    detector: TypeDetector | None,
    unit: Unit,
    preamp: bool,
    *,
    rng: np.random.Generator | None = None,
    avg_samples: int = 1,
) -> float:
    """Ground-truth channel reading over [f_min, f_max] in `unit`.

    Without `rng` this is the noiseless oracle; with one, a Gaussian dB
    jitter (std noise_sigma_db, reduced by sqrt(avg_samples) under rolling
    average) is applied to the density before unit conversion.
    """
    if not (FREQ_MIN_HZ <= f_min < f_max <= FREQ_MAX_HZ):
        raise ValueError(f"invalid span [{f_min}, {f_max}]")
    w = scene.level_w(f_min, f_max, preamp)
    if rng is not None:
        w *= 10.0 ** (rng.normal(0.0, jitter_sigma(scene, detector, avg_samples)) / 10.0)
    return convert(w, Unit.WPM2, unit)


def trace_values_w(scene: Scene, freqs_hz, preamp: bool, rng: np.random.Generator | None = None) -> np.ndarray:
    """Per-point density (W/m^2) for a sweep: point PSD times the bin width."""
    freqs = np.asarray(freqs_hz, dtype=float)
    rbw = (freqs[-1] - freqs[0]) / (len(freqs) - 1)
    vals = np.array([scene.point_psd(f, preamp) * rbw for f in freqs])
    if rng is not None:
        vals *= 10.0 ** (rng.normal(0.0, scene.config.noise_sigma_db, size=len(vals)) / 10.0)
    return vals


def _noise_segments(plan: BandPlan) -> list[tuple[float, float, float, float]]:
    """Piecewise-constant noise PSD covering the whole instrument range."""
    bands = plan.sorted_bands()
    if not bands:
        return [(FREQ_MIN_HZ, FREQ_MAX_HZ, 0.0, 0.0)]
    psd = []
    for b in bands:
        row = plan.noise_floor.row(b.id)
        psd.append((dbm_m2_to_w_m2(row.level_preamp_off) / b.width_hz, dbm_m2_to_w_m2(row.level_preamp_on) / b.width_hz))
    segs = []
    lo = float(min(FREQ_MIN_HZ, bands[0].f_start.hertz))
    for i, b in enumerate(bands):
        start = max(lo, b.f_start.hertz)
        if start > lo:  # gap below this band: split at the midpoint
            mid = (lo + start) / 2
            if i > 0:
                segs.append((lo, mid, *psd[i - 1]))
                segs.append((mid, start, *psd[i]))
            else:
                segs.append((lo, start, *psd[i]))
        segs.append((start, float(b.f_stop.hertz), *psd[i]))
        lo = float(b.f_stop.hertz)
    segs.append((lo, float(max(FREQ_MAX_HZ, lo)), *psd[-1]))
    return segs


# --- scene files -------------------------------------------------------------


def scene_from_dict(data: dict, base_dir: str | os.PathLike | None = None) -> SceneConfig:
    if not isinstance(data, dict):
        raise ConfigError("scene: top level must be a mapping")
    known = {
        "plan", "emitters", "antenna_target", "front_to_back_db", "preamp_gain_db",
        "adc_max_dbm_m2", "noise_sigma_db", "rng_seed", "ul_capacity_mbps",
        "dl_capacity_mbps", "ack_ratio", "trace_points", "max_ref_level_dbm_m2", "location",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"scene: unknown field(s) {sorted(unknown)}")
    plan_ref = data.get("plan")
    if plan_ref in (None, "default", "w3"):
        plan = default_plan()
        plan_ref = None
    else:
        p = Path(plan_ref)
        if base_dir is not None and not p.is_absolute():
            p = Path(base_dir) / p
        plan = load_plan(p)

    def num(key, default, cast=float):
        try:
            return cast(data.get(key, default))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"scene: field {key!r}: {exc}") from exc

    emitters = []
    for i, raw in enumerate(data.get("emitters") or []):
        try:
            emitters.append(
                Emitter(
                    band_id=str(raw["band_id"]),
                    role=Role(raw["role"]),
                    base_density=float(raw["base_density_dbm_m2"]),
                    traffic_coupling=float(raw.get("traffic_coupling", 0.0)),
                    psd_shape=PsdShape(raw.get("psd_shape", "FLAT")),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"scene: emitters[{i}]: bad or missing field {exc}") from exc
    loc = data.get("location") or {}
    try:
        location = Location(str(loc.get("label", "sim")), bool(loc.get("los", True)), float(loc.get("distance_to_rbs_m", 0.0)))
        return SceneConfig(
            plan=plan,
            emitters=tuple(emitters),
            antenna_target=Role(data.get("antenna_target", "RBS")),
            front_to_back_db=num("front_to_back_db", 20.0),
            preamp_gain_db=num("preamp_gain_db", 20.0),
            adc_max=num("adc_max_dbm_m2", -30.0),
            noise_sigma_db=num("noise_sigma_db", 0.3),
            rng_seed=num("rng_seed", 0, int),
            ul_capacity_mbps=num("ul_capacity_mbps", 60.0),
            dl_capacity_mbps=num("dl_capacity_mbps", 150.0),
            ack_ratio=num("ack_ratio", 0.1),
            trace_points=num("trace_points", 1001, int),
            max_ref_level=num("max_ref_level_dbm_m2", 80.0),
            location=location,
            plan_file=plan_ref,
        )
    except ValueError as exc:
        raise ConfigError(f"scene: {exc}") from exc


def scene_to_dict(cfg: SceneConfig) -> dict:
    return {
        "plan": cfg.plan_file or "default",
        "location": {
            "label": cfg.location.label,
            "los": cfg.location.los,
            "distance_to_rbs_m": cfg.location.distance_to_rbs_m,
        },
        "antenna_target": cfg.antenna_target.value,
        "front_to_back_db": cfg.front_to_back_db,
        "preamp_gain_db": cfg.preamp_gain_db,
        "adc_max_dbm_m2": cfg.adc_max,
        "noise_sigma_db": cfg.noise_sigma_db,
        "rng_seed": cfg.rng_seed,
        "ul_capacity_mbps": cfg.ul_capacity_mbps,
        "dl_capacity_mbps": cfg.dl_capacity_mbps,
        "ack_ratio": cfg.ack_ratio,
        "trace_points": cfg.trace_points,
        "max_ref_level_dbm_m2": cfg.max_ref_level,
        "emitters": [
            {
                "band_id": e.band_id,
                "role": e.role.value,
                "base_density_dbm_m2": e.base_density,
                "traffic_coupling": e.traffic_coupling,
            }
            for e in cfg.emitters
        ],
    }


def parse_scene(text: str, base_dir=None) -> SceneConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"scene: {exc}") from exc
    return scene_from_dict(data, base_dir)


def load_scene(path: str | os.PathLike) -> SceneConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scene file {path}: {exc}") from exc
    return parse_scene(text, base_dir=path.parent)


def dump_scene(cfg: SceneConfig) -> str:
    return yaml.safe_dump(scene_to_dict(cfg), sort_keys=False)
