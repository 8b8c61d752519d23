"""Command line entry point: ``emf-exposure {simulate,measure,analyze,export,corpus}``.

Exit codes: 0 success, 2 input/config error, 3 transport error, 4 engine
error (partial session still written), 5 analysis error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .analysis.report import analyze
from .analysis.stats import confidence_interval
from .clock import RealClock
from .engine.operator import StdinOperator
from .engine.params import load_params
from .engine.phases import SessionMetadata, run_session
from .errors import ConfigError, ExposureError, InsufficientDataError, SchemaVersionError, TransportError
from .model import Direction, Session
from .scenarios import ScenarioScript, generate_corpus, load_script, resolve_scene, run_scenario
from .scpi.client import ScpiClient, parse_address
from .simulator.scene import Scene
from .simulator.server import SimulatorServer
from .storage import atomic_write_text, dump_session, load_plan, load_session, save_session, series_to_csv
from .traffic import IperfBackend, TrafficController

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_TRANSPORT = 3
EXIT_ENGINE = 4
EXIT_ANALYSIS = 5

ENV_INSTRUMENT = "EMF_INSTRUMENT"
DEFAULT_INSTRUMENT = "127.0.0.1:5025"

log = logging.getLogger("emf_exposure")


def _rate(text: str) -> float | None:
    if text.lower() == "max":
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"rate must be a number of Mbps or 'max', got {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError("rate must be positive")
    return value


def _direction(text: str) -> Direction:
    try:
        return Direction(text.upper())
    except ValueError:
        raise argparse.ArgumentTypeError("direction must be ul or dl") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="emf-exposure", description="5G/4G EMF exposure measurement toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="serve a simulated spectrum analyzer")
    s.add_argument("--scene", default="builtin:los", help="scene file or builtin:los / builtin:nlos")
    s.add_argument("--instrument", default=None, help="listen address HOST:PORT (default 127.0.0.1:5025)")
    s.add_argument("--control-port", type=int, default=None, help="scene control port")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--transcript", default=None, help="append instrument traffic to this file")

    m = sub.add_parser("measure", help="run a measurement session (M1-M3 prompts, P1-P3)")
    m.add_argument("--instrument", default=None, help=f"HOST:PORT (default ${ENV_INSTRUMENT} or {DEFAULT_INSTRUMENT})")
    m.add_argument("--plan", default=None, help="band plan file (default bundled W3 plan)")
    m.add_argument("--params", default=None, help="engine parameter file")
    m.add_argument("--scene", default=None, help="measure an in-process simulated scene")
    m.add_argument("--script", default=None, help="scenario script; answers prompts and drives the scene")
    m.add_argument("--out", required=True, help="session document to write")
    m.add_argument("--transcript", default=None, help="SCPI transcript file (default: <out>.scpi.log)")
    m.add_argument("--seed", type=int, default=None)
    m.add_argument("--direction", type=_direction, default=Direction.UL, help="ul or dl")
    m.add_argument("--rate", type=_rate, default=None, help="target rate in Mbps, or max")
    m.add_argument("--iperf-server", default=None, help="HOST[:PORT] of the iperf3 server (real instrument only)")
    m.add_argument("--location", default=None, help="location label")
    m.add_argument("--los", choices=("yes", "no"), default=None)
    m.add_argument("--distance", type=float, default=None, help="distance to the RBS in metres")

    a = sub.add_parser("analyze", help="breakdowns, shares, fit and band occurrence for sessions")
    a.add_argument("sessions", nargs="+")
    a.add_argument("--plan", default=None)
    a.add_argument("--out", default=None, help="JSON report path (default: stdout)")
    a.add_argument("--csv", default=None, help="per-location CSV path")

    e = sub.add_parser("export", help="export a session's series as CSV or JSON")
    e.add_argument("session")
    e.add_argument("--format", choices=("csv", "json"), default="csv")
    e.add_argument("--out", default=None, help="output path (default: stdout)")

    c = sub.add_parser("corpus", help="write a synthetic multi-location session corpus")
    c.add_argument("--out", required=True, help="output directory")
    c.add_argument("--seed", type=int, default=None, help="adds seeded sample scatter")
    c.add_argument("--jitter", type=float, default=0.01, help="relative scatter when --seed is given")
    return p


# --- simulate ------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = resolve_scene(args.scene)
    if args.seed is not None:
        cfg = replace(cfg, rng_seed=args.seed)
    host, port = parse_address(args.instrument or DEFAULT_INSTRUMENT)
    scene = Scene(cfg, RealClock())
    fh = open(args.transcript, "a", encoding="utf-8") if args.transcript else None

    def record(direction: str, line: str) -> None:
        fh.write(f"{scene.clock.now():.3f} {direction} {line}\n")
        fh.flush()

    try:
        try:
            server = SimulatorServer(scene, host, port, control_port=args.control_port,
                                     transcript=record if fh else None)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_TRANSPORT
        h, p = server.address
        msg = f"simulated analyzer on {h}:{p}"
        if server.control_address:
            msg += f", control on {server.control_address[0]}:{server.control_address[1]}"
        print(msg, flush=True)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
    finally:
        if fh:
            fh.close()
    return EXIT_OK


# --- measure -------------------------------------------------------------------


def _summary(session: Session) -> str:
    lines = [f"session {session.location_label}: selected {', '.join(session.selected_bands) or '-'}"]
    for phase, series in (("P1", session.phase1), ("P2", session.phase2), ("P3", session.phase3)):
        for s in series:
            try:
                mean, h = confidence_interval(s.values)
                lines.append(f"  {phase} {s.band_id:<10} {mean:12.4f} +/- {h:.4f} {s.unit.value}")
            except InsufficientDataError:
                lines.append(f"  {phase} {s.band_id:<10} {s.values[0] if s.values else float('nan'):12.4f} {s.unit.value}")
    if session.throughput_log:
        rates = [r for _, r in session.throughput_log]
        lines.append(f"  throughput {sum(rates) / len(rates):.2f} Mbps over {len(rates)} reports")
    for n in session.errors:
        lines.append(f"  ! {n.phase}{' ' + n.band_id if n.band_id else ''}: {n.message}")
    return "\n".join(lines)


def _write_transcript(path: str | os.PathLike, entries) -> None:
    atomic_write_text(path, "".join(e.format() + "\n" for e in entries))


def cmd_measure(args) -> int:
    params = load_params(args.params)
    plan = load_plan(args.plan)
    transcript_path = args.transcript or f"{args.out}.scpi.log"

    script: ScenarioScript | None = load_script(args.script) if args.script else None
    if script is not None or args.scene is not None:
        cfg = resolve_scene(args.scene) if args.scene else script.scene_config()
        if args.plan:
            cfg = replace(cfg, plan=plan)
        if args.location or args.los or args.distance is not None:
            loc = cfg.location
            cfg = replace(cfg, location=type(loc)(
                args.location or loc.label,
                loc.los if args.los is None else args.los == "yes",
                loc.distance_to_rbs_m if args.distance is None else args.distance,
            ))
        if script is None:
            # interactive prompts against the in-process scene
            script = ScenarioScript(scene=args.scene, direction=args.direction, rate_mbps=args.rate)
            interactive = True
        else:
            interactive = False
        run = run_scenario(
            cfg, params, script=script, seed=args.seed,
            operator=StdinOperator() if interactive else None,
        )
        session = run.session
        save_session(session, args.out)
        _write_transcript(transcript_path, run.transcript)
    else:
        address = args.instrument or os.environ.get(ENV_INSTRUMENT) or DEFAULT_INSTRUMENT
        host, port = parse_address(address)
        if not args.iperf_server:
            raise ConfigError("--iperf-server is required when measuring a real instrument")
        ihost, iport = parse_address(args.iperf_server, 5201)
        clock = RealClock()
        instr = ScpiClient.connect(host, port, clock=clock)
        meta = SessionMetadata(args.location or "field", args.los != "no", args.distance or 0.0, args.direction)
        try:
            session = run_session(
                instr, TrafficController(IperfBackend(ihost, iport, clock=clock)), plan, params,
                StdinOperator(), meta, clock=clock, target_rate=args.rate, save_to=args.out,
            )
        finally:
            _write_transcript(transcript_path, instr.transcript)
            instr.close()
    print(_summary(session))
    print(f"session written to {args.out}")
    return EXIT_ENGINE if session.errors else EXIT_OK


# --- analyze / export -----------------------------------------------------------


def cmd_analyze(args) -> int:
    plan = load_plan(args.plan)
    sessions = []
    for path in args.sessions:
        try:
            sessions.append(load_session(path))
        except SchemaVersionError:
            raise
        except ConfigError as exc:
            print(f"warning: skipping {path}: {exc}", file=sys.stderr)
    if not sessions:
        print("error: no readable session", file=sys.stderr)
        return EXIT_ANALYSIS
    try:
        report = analyze(sessions, plan)
    except (ExposureError, ValueError, KeyError) as exc:
        print(f"error: analysis failed: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    if args.out:
        atomic_write_text(args.out, report.to_json())
    else:
        sys.stdout.write(report.to_json())
    if args.csv:
        atomic_write_text(args.csv, report.to_csv())
    for note in report.notes:
        print(f"note: {note}", file=sys.stderr)
    return EXIT_OK


def cmd_export(args) -> int:
    session = load_session(args.session)
    if args.format == "csv":
        text = series_to_csv([*session.phase1, *session.phase2, *session.phase3])
    else:
        text = dump_session(session)
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_corpus(args) -> int:
    out = Path(args.out)
    sessions = generate_corpus(seed=args.seed, jitter=args.jitter if args.seed is not None else 0.0)
    for s in sessions:
        save_session(s, out / f"{s.location_label}.json")
    print(f"{len(sessions)} sessions written to {out}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "measure": cmd_measure,
    "analyze": cmd_analyze,
    "export": cmd_export,
    "corpus": cmd_corpus,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TransportError as exc:
        print(f"error: transport: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except ExposureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
