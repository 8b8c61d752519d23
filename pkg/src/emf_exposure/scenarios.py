"""Ready-made scenes, scripted scenarios and a synthetic campaign corpus.

`run_scenario` wires the whole stack in-process: a simulated clock shared by
scene, instrument server, traffic link and engine, with the operator's
antenna moves applied to the scene as each step is confirmed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from .analysis.fitting import REFERENCE_PARAMS, FitParams, estimate_cost
from .clock import SimulatedClock
from .engine.operator import ANTENNA_AFTER, FollowingOperator, Operator, ScriptedOperator
from .engine.params import EngineParams
from .engine.phases import SessionMetadata, run_session
from .errors import ConfigError
from .model import (
    DOWNLINK_SIDE,
    UPLINK_SIDE,
    BandPlan,
    Direction,
    Duplex,
    ExposureSeries,
    Session,
    Source,
)
from .scpi.client import ScpiClient, TranscriptEntry
from .simulator.scene import Emitter, Location, Role, Scene, SceneConfig, load_scene
from .simulator.server import SimulatorServer
from .storage import default_plan
from .traffic import SimulatedLink, TrafficController
from .units import Unit, convert

P1_BANDS = ("B20-DL", "B8-DL", "B3-DL", "B1-DL", "B7-DL", "B38", "N78-3437", "N78-3537", "N78-3600")

# --- scenes -----------------------------------------------------------------


def _rbs_env(density: float, active: dict[str, float] | None = None) -> list[Emitter]:
    """One RBS emitter per monitored band; bands in `active` are traffic-coupled."""
    active = active or {}
    return [Emitter(b, Role.RBS, density, active.get(b, 0.0)) for b in P1_BANDS]


def los_scene_config(seed: int = 0, plan: BandPlan | None = None) -> SceneConfig:
    """Line of sight, close to the site: strong RBS signals, moderate UE power, fast link."""
    return SceneConfig(
        plan=plan or default_plan(),
        emitters=tuple(
            _rbs_env(-30.0, {"B3-DL": 0.5, "N78-3600": 0.5})
            + [
                Emitter("B3-UL", Role.UE, -20.0, 1.0),
                Emitter("N78-3600", Role.UE, -18.0, 1.0),
            ]
        ),
        rng_seed=seed,
        ul_capacity_mbps=60.0,
        dl_capacity_mbps=300.0,
        location=Location("los-site", True, 120.0),
    )


def nlos_scene_config(seed: int = 0, plan: BandPlan | None = None) -> SceneConfig:
    """Obstructed path: weak RBS signals, the phone transmits near full power at a low rate."""
    return SceneConfig(
        plan=plan or default_plan(),
        emitters=tuple(
            _rbs_env(-45.0, {"B3-DL": 0.5, "N78-3600": 0.5})
            + [
                Emitter("B3-UL", Role.UE, -10.0, 1.0),
                Emitter("N78-3600", Role.UE, -8.0, 1.0),
            ]
        ),
        rng_seed=seed,
        ul_capacity_mbps=8.0,
        dl_capacity_mbps=40.0,
        location=Location("nlos-site", False, 250.0),
    )


BUILTIN_SCENES: dict[str, Callable[..., SceneConfig]] = {"los": los_scene_config, "nlos": nlos_scene_config}


def resolve_scene(ref: str | os.PathLike, base_dir: str | os.PathLike | None = None) -> SceneConfig:
    """A scene file path, or ``builtin:los`` / ``builtin:nlos``."""
    text = str(ref)
    if text.startswith("builtin:"):
        name = text.split(":", 1)[1]
        if name not in BUILTIN_SCENES:
            raise ConfigError(f"unknown builtin scene {name!r}")
        return BUILTIN_SCENES[name]()
    p = Path(text)
    if base_dir is not None and not p.is_absolute():
        p = Path(base_dir) / p
    return load_scene(p)


# --- scripts ----------------------------------------------------------------

ACTIONS = ("antenna", "traffic", "confirm", "set_emitter")


@dataclass(frozen=True)
class ScriptAction:
    at: float
    action: str
    args: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ScenarioScript:
    scene: str
    actions: tuple[ScriptAction, ...] = ()
    expect: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None
    direction: Direction = Direction.UL
    rate_mbps: float | None = None
    base_dir: str | None = None

    def __post_init__(self):
        times = [a.at for a in self.actions]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("script actions must be time-ordered")

    def answers(self) -> dict[str, bool]:
        out = {}
        for a in self.actions:
            if a.action == "confirm":
                out[str(a.args["step"])] = str(a.args.get("answer", "ok")).strip().lower() == "ok"
        return out

    def scene_config(self) -> SceneConfig:
        return resolve_scene(self.scene, self.base_dir)


def script_from_dict(data: dict, base_dir: str | os.PathLike | None = None) -> ScenarioScript:
    if not isinstance(data, dict):
        raise ConfigError("script: top level must be a mapping")
    unknown = set(data) - {"scene", "actions", "expect", "seed", "direction", "rate"}
    if unknown:
        raise ConfigError(f"script: unknown field(s) {sorted(unknown)}")
    if "scene" not in data:
        raise ConfigError("script: missing field 'scene'")
    actions = []
    for i, raw in enumerate(data.get("actions") or []):
        if not isinstance(raw, dict) or "action" not in raw:
            raise ConfigError(f"script: actions[{i}]: needs an 'action' field")
        kind = raw["action"]
        if kind not in ACTIONS:
            raise ConfigError(f"script: actions[{i}]: unknown action {kind!r}")
        args = {k: v for k, v in raw.items() if k not in ("at", "action")}
        if kind == "confirm" and "step" not in args:
            raise ConfigError(f"script: actions[{i}]: confirm needs 'step'")
        try:
            actions.append(ScriptAction(float(raw.get("at", 0.0)), kind, args))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"script: actions[{i}].at: {exc}") from exc
    rate = data.get("rate", "max")
    try:
        return ScenarioScript(
            scene=str(data["scene"]),
            actions=tuple(actions),
            expect=dict(data.get("expect") or {}),
            seed=None if data.get("seed") is None else int(data["seed"]),
            direction=Direction(str(data.get("direction", "UL")).upper()),
            rate_mbps=None if str(rate).lower() == "max" else float(rate),
            base_dir=None if base_dir is None else str(base_dir),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"script: {exc}") from exc


def load_script(path: str | os.PathLike) -> ScenarioScript:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read script {path}: {exc}") from exc
    return script_from_dict(data, base_dir=path.parent)


def schedule_actions(script: ScenarioScript, scene: Scene, clock: SimulatedClock) -> None:
    """Register the timed scene actions on the clock; confirms are answered by the operator."""

    def do(a: ScriptAction) -> None:
        if a.action == "antenna":
            scene.point_antenna(str(a.args["target"]).upper())
        elif a.action == "traffic":
            on = str(a.args.get("state", "on")).lower() in ("on", "true", "1")
            duration = a.args.get("duration_s")
            scene.set_traffic(
                on,
                Direction(str(a.args.get("direction", "UL")).upper()),
                float(a.args.get("rate_mbps", 0.0)),
                until=None if duration is None else clock.now() + float(duration),
            )
        elif a.action == "set_emitter":
            scene.set_emitter_density(int(a.args["index"]), float(a.args["density_dbm_m2"]))

    for a in script.actions:
        if a.action != "confirm":
            clock.call_at(a.at, lambda a=a: do(a))


# --- in-process runs ----------------------------------------------------------


@dataclass
class ScenarioRun:
    session: Session
    transcript: list[TranscriptEntry]
    elapsed_s: float
    asked: list[str]


def run_scenario(
    config: SceneConfig,
    params: EngineParams | None = None,
    *,
    script: ScenarioScript | None = None,
    answers: dict[str, bool] | None = None,
    seed: int | None = None,
    direction: Direction = Direction.UL,
    rate_mbps: float | None = None,
    link_up: bool = True,
    operator: Operator | None = None,
    save_to: str | os.PathLike | None = None,
) -> ScenarioRun:
    """One full measurement session against an in-process simulator."""
    params = params or EngineParams()
    if script is not None:
        seed = script.seed if seed is None else seed
        direction, rate_mbps = script.direction, script.rate_mbps
        answers = {**script.answers(), **(answers or {})}
    if seed is not None:
        config = replace(config, rng_seed=seed)
    clock = SimulatedClock()
    scene = Scene(config, clock)
    if script is not None:
        schedule_actions(script, scene, clock)
    scripted = ScriptedOperator(answers)
    inner = operator if operator is not None else scripted
    following = FollowingOperator(inner, lambda step: scene.point_antenna(ANTENNA_AFTER[step]))
    link = SimulatedLink(scene, clock, seed=config.rng_seed, link_up=link_up)
    loc = config.location
    meta = SessionMetadata(loc.label, loc.los, loc.distance_to_rbs_m, direction)
    with SimulatorServer(scene, port=0) as server:
        host, port = server.address
        with ScpiClient.connect(host, port, clock=clock) as instr:
            session = run_session(
                instr, TrafficController(link), config.plan, params, following, meta,
                clock=clock, target_rate=rate_mbps, save_to=save_to,
            )
            transcript = list(instr.transcript)
    return ScenarioRun(session, transcript, clock.now(), scripted.asked)


# --- synthetic corpus -----------------------------------------------------------

# (selected bands, line of sight) per location; carrier aggregation and
# NSA dual connectivity show up as several UL/DL pairs in one selection.
CORPUS_LAYOUT: tuple[tuple[tuple[str, ...], bool], ...] = (
    (("B3-UL", "B3-DL"), True),
    (("B3-UL", "B3-DL", "N78-3600"), True),
    (("B7-UL", "B7-DL"), False),
    (("B3-UL", "B3-DL", "N78-3437"), True),
    (("B1-UL", "B1-DL", "B3-UL", "B3-DL"), False),
    (("B20-UL", "B20-DL"), False),
    (("B3-UL", "B3-DL", "N78-3600"), True),
    (("B38",), True),
    (("B3-UL", "B3-DL", "B7-UL", "B7-DL"), True),
    (("B8-UL", "B8-DL"), False),
    (("B3-UL", "B3-DL", "N78-3537"), True),
    (("B3-UL", "B3-DL"), False),
    (("B1-UL", "B1-DL", "N78-3600"), True),
    (("B7-UL", "B7-DL", "N78-3600"), True),
    (("B3-UL", "B3-DL"), True),
    (("B20-UL", "B20-DL", "B3-UL", "B3-DL"), False),
    (("B3-UL", "B3-DL", "N78-3437"), False),
    (("B1-UL", "B1-DL"), True),
    (("B3-UL", "B3-DL", "N78-3600"), True),
    (("B7-UL", "B7-DL"), True),
    (("B3-UL", "B3-DL", "B1-UL", "B1-DL", "N78-3600"), True),
    (("B38", "B3-UL", "B3-DL"), False),
    (("B3-UL", "B3-DL"), True),
    (("B8-UL", "B8-DL", "B3-UL", "B3-DL"), False),
    (("B3-UL", "B3-DL", "N78-3537"), True),
    (("B7-UL", "B7-DL", "N78-3437"), True),
)


def corpus_occurrence(layout=CORPUS_LAYOUT) -> dict[str, int]:
    counts: dict[str, int] = {}
    for bands, _ in layout:
        for b in set(bands):
            counts[b] = counts.get(b, 0) + 1
    return counts


def _constant_series(band_id: str, unit: Unit, value: float, source: Source, t0: float, n: int,
                     dt: float, rng: np.random.Generator | None, jitter: float) -> ExposureSeries:
    samples = []
    for k in range(n):
        v = value if rng is None else value * (1.0 + jitter * rng.normal())
        samples.append((t0 + k * dt, v))
    return ExposureSeries(band_id, unit, tuple(samples), source)


def generate_corpus(
    plan: BandPlan | None = None,
    *,
    params: FitParams = REFERENCE_PARAMS,
    layout=CORPUS_LAYOUT,
    seed: int | None = None,
    jitter: float = 0.0,
    n_samples: int = 12,
) -> list[Session]:
    """Sessions whose exposure per Mbps follows the double-exponential law.

    Throughputs are spread over 1-50 Mbps; NLOS locations get the low end.
    The total density is split between RBS environment (20%, LOS) or 5%
    (NLOS), active RBS (10%) and UE (the rest), evenly across the bands of
    each group.
    """
    plan = plan or default_plan()
    rng = None if seed is None else np.random.default_rng(seed)
    n = len(layout)
    nlos = [i for i, (_, los) in enumerate(layout) if not los]
    los = [i for i, (_, los) in enumerate(layout) if los]
    rates = np.linspace(1.0, 50.0, n)
    throughput = {}
    for k, i in enumerate(nlos + los):
        throughput[i] = float(rates[k])
    env_bands = [b.id for b in plan.bands_with((Duplex.FDD_DL, Duplex.TDD))]
    sessions = []
    for i, (bands, is_los) in enumerate(layout):
        t = throughput[i]
        total_field = estimate_cost(t, params) * t
        total_w = convert(total_field, Unit.VPM, Unit.WPM2)
        env_frac = 0.20 if is_los else 0.05
        act_frac = 0.10
        ue_frac = 1.0 - env_frac - act_frac
        ul = [b for b in bands if plan.band(b).duplex in UPLINK_SIDE]
        dl = [b for b in bands if plan.band(b).duplex in DOWNLINK_SIDE]
        p1 = tuple(
            _constant_series(b, Unit.DBM_M2, convert(env_frac * total_w / len(env_bands), Unit.WPM2, Unit.DBM_M2),
                             Source.RBS_ENV, 0.0, n_samples, 0.5, None, 0.0)
            for b in env_bands
        )
        p2 = tuple(
            _constant_series(b, Unit.VPM, convert(ue_frac * total_w / len(ul), Unit.WPM2, Unit.VPM),
                             Source.UE_ACTIVE, 200.0, n_samples, 0.5, rng, jitter)
            for b in ul
        )
        p3 = tuple(
            _constant_series(b, Unit.VPM, convert(act_frac * total_w / len(dl), Unit.WPM2, Unit.VPM),
                             Source.RBS_ACTIVE, 260.0, n_samples, 0.5, rng, jitter)
            for b in dl
        )
        log = tuple((200.0 + k, t) for k in range(1, 61))
        sessions.append(
            Session(
                location_label=f"loc-{i + 1:02d}",
                los=is_los,
                distance_to_rbs_m=float(50 + 15 * i),
                direction=Direction.UL,
                phase1=p1,
                selected_bands=tuple(b.id for b in plan.sorted_bands() if b.id in bands),
                phase2=p2,
                phase3=p3,
                throughput_log=log,
            )
        )
    return sessions

