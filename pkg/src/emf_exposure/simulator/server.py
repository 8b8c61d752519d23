"""Protocol-compatible spectrum-analyzer server backed by a Scene.

One instrument client at a time: while a session is open, further
connections get an unsolicited ``ERR 110`` and are closed. Each new session
starts from a fresh instrument state and a fresh RNG seeded from the scene,
so identical command sequences give identical response bytes.

An optional control port accepts scene mutations (antenna pointing, traffic)
from any number of clients concurrently with instrument queries.
"""

from __future__ import annotations

import logging
import socket
import threading
from dataclasses import dataclass

import numpy as np

from .. import __version__
from ..model import Direction
from ..scpi import dialect
from ..scpi.client import trace_grid
from ..scpi.dialect import TraceDetector, TypeDetector
from ..units import Unit, convert
from .scene import FREQ_MAX_HZ, FREQ_MIN_HZ, Role, Scene, jitter_sigma, scene_reading, trace_values_w

log = logging.getLogger(__name__)

IDN_RESPONSE = f"EMF-SIM,SAN-SIMULATOR,0,{__version__}"
MAX_VPM_REF = 1000.0


class CommandError(Exception):
    def __init__(self, code: int):
        self.code = code


@dataclass
class InstrumentState:
    unit: Unit = Unit.DBM_M2
    f_start: int = 791_000_000
    f_stop: int = 3_620_000_000
    attenuation: float | None = None
    resolution_bw: int | None = None
    video_bw: int | None = None
    sweep_points: int | None = None
    trace_detector: TraceDetector = TraceDetector.RMS
    type_detector: TypeDetector = TypeDetector.ROLLING_AVERAGE
    avg_samples: int = 1
    ref_level: float = 65.0
    scale_div: float = 15.0
    preamp: bool = False
    max_hold: float | None = None  # W/m^2 since last reset
    max_hold_span: tuple[int, int] | None = None


class SimulatedAnalyzer:
    """Line-in, line-out command interpreter; no sockets involved."""

    def __init__(self, scene: Scene):
        self.scene = scene
        self.state = InstrumentState()
        self.rng = np.random.default_rng(scene.config.rng_seed)

    def reset(self) -> None:
        self.state = InstrumentState()
        self.rng = np.random.default_rng(self.scene.config.rng_seed)

    def handle(self, line: str) -> str:
        try:
            return self._dispatch(line.strip())
        except CommandError as exc:
            return dialect.error_frame(exc.code)

    # --- parsing helpers -----------------------------------------------------

    @staticmethod
    def _num(text: str) -> float:
        try:
            return dialect.parse_number(text)
        except ValueError:
            raise CommandError(dialect.ERR_MALFORMED) from None

    def _freq(self, text: str) -> int:
        v = self._num(text)
        if v != int(v):
            raise CommandError(dialect.ERR_BAD_VALUE)
        if not FREQ_MIN_HZ <= v <= FREQ_MAX_HZ:
            raise CommandError(dialect.ERR_BAD_VALUE)
        return int(v)

    def _span_args(self, args: list[str]) -> tuple[int, int]:
        if len(args) != 2:
            raise CommandError(dialect.ERR_MALFORMED)
        lo, hi = (self._num(a) for a in args)
        if not (FREQ_MIN_HZ <= lo < hi <= FREQ_MAX_HZ):
            raise CommandError(dialect.ERR_BAD_SPAN)
        return int(lo), int(hi)

    # --- dispatcher ----------------------------------------------------------

    def _dispatch(self, line: str) -> str:
        if not line:
            raise CommandError(dialect.ERR_MALFORMED)
        header, *args = line.split()
        header = header.upper()
        if header == dialect.IDN and not args:
            return IDN_RESPONSE
        if header == dialect.RESET_TRACE and not args:
            self.state.max_hold = None
            self.state.max_hold_span = None
            return dialect.OK
        if header == dialect.QUERY_MAX_LEVEL:
            return self._max_level(*self._span_args(args))
        if header == dialect.QUERY_CHANNEL_POWER:
            return self._channel_power(*self._span_args(args))
        if header == dialect.QUERY_TRACE and not args:
            return self._trace()
        if header.endswith("?") and header[:-1] in dialect.FIELD_BY_HEADER and not args:
            return self._get(dialect.FIELD_BY_HEADER[header[:-1]])
        if header in dialect.FIELD_BY_HEADER and len(args) == 1:
            self._set(dialect.FIELD_BY_HEADER[header], args[0])
            return dialect.OK
        raise CommandError(dialect.ERR_MALFORMED)

    def _get(self, field: str) -> str:
        v = getattr(self.state, field)
        if v is None:
            return "AUTO"
        if isinstance(v, bool):
            return "ON" if v else "OFF"
        if hasattr(v, "value"):
            return v.value
        return dialect.format_number(v)

    def _set(self, field: str, raw: str) -> None:
        s = self.state
        token = raw.upper()
        try:
            if field == "unit":
                s.unit = Unit(token)
                if s.unit is Unit.WPM2:
                    raise ValueError
            elif field in ("f_start", "f_stop"):
                setattr(s, field, self._freq(raw))
            elif field == "attenuation":
                v = self._num(raw)
                if not 0 <= v <= 70:
                    raise ValueError
                s.attenuation = v
            elif field in ("resolution_bw", "video_bw"):
                v = self._num(raw)
                if not 1 <= v <= 10_000_000:
                    raise ValueError
                setattr(s, field, int(v))
            elif field == "sweep_points":
                v = self._num(raw)
                if v != int(v) or not 2 <= v <= 100_001:
                    raise ValueError
                s.sweep_points = int(v)
            elif field == "trace_detector":
                s.trace_detector = TraceDetector(token)
            elif field == "type_detector":
                s.type_detector = TypeDetector(token)
            elif field == "avg_samples":
                v = self._num(raw)
                if v != int(v) or not 1 <= v <= 10_000:
                    raise ValueError
                s.avg_samples = int(v)
            elif field == "ref_level":
                v = self._num(raw)
                if s.unit is Unit.VPM:
                    if not 0 < v <= MAX_VPM_REF or convert(v, Unit.VPM, Unit.DBM_M2) > self.scene.config.max_ref_level:
                        raise ValueError
                elif v > self.scene.config.max_ref_level or v < -200:
                    raise ValueError
                s.ref_level = v
            elif field == "scale_div":
                v = self._num(raw)
                if not 0 < v <= 100:
                    raise ValueError
                s.scale_div = v
            elif field == "preamp":
                if token not in ("ON", "OFF"):
                    raise ValueError
                s.preamp = token == "ON"
                s.max_hold = None
                if s.preamp and self.scene.over_range(s.f_start, s.f_stop, True):
                    raise CommandError(dialect.ERR_OVER_RANGE)
        except (ValueError, KeyError):
            raise CommandError(dialect.ERR_BAD_VALUE) from None
        if field in ("unit", "f_start", "f_stop", "type_detector"):
            s.max_hold = None

    # --- measurements ----------------------------------------------------------

    def _format(self, w: float) -> str:
        return dialect.format_number(convert(w, Unit.WPM2, self.state.unit))

    def _check_over_range(self, lo: int, hi: int) -> None:
        if self.scene.over_range(lo, hi, self.state.preamp):
            raise CommandError(dialect.ERR_OVER_RANGE)

    def _sample_w(self, lo: int, hi: int) -> float:
        s = self.state
        w = scene_reading(self.scene, lo, hi, s.type_detector, Unit.WPM2, s.preamp)
        sigma = jitter_sigma(self.scene, s.type_detector, s.avg_samples)
        return w * 10.0 ** (self.rng.normal(0.0, sigma) / 10.0)

    def _max_level(self, lo: int, hi: int) -> str:
        s = self.state
        if s.type_detector not in (TypeDetector.ROLLING_MAX, TypeDetector.MAX):
            raise CommandError(dialect.ERR_DETECTOR)
        self._check_over_range(lo, hi)
        # the level reported is the span's channel level under max hold
        w = self._sample_w(lo, hi)
        if s.type_detector is TypeDetector.ROLLING_MAX:
            if s.max_hold_span == (lo, hi) and s.max_hold is not None:
                w = max(w, s.max_hold)
            s.max_hold, s.max_hold_span = w, (lo, hi)
        return self._format(w)

    def _channel_power(self, lo: int, hi: int) -> str:
        self._check_over_range(lo, hi)
        return self._format(self._sample_w(lo, hi))

    def _trace(self) -> str:
        s = self.state
        if not s.f_start < s.f_stop:
            raise CommandError(dialect.ERR_BAD_SPAN)
        self._check_over_range(s.f_start, s.f_stop)
        n = s.sweep_points or self.scene.config.trace_points
        freqs = trace_grid(s.f_start, s.f_stop, n)
        vals = trace_values_w(self.scene, freqs, s.preamp, self.rng)
        return ",".join(self._format(float(v)) for v in vals)


class SimulatorServer:
    """TCP front end for SimulatedAnalyzer (plus an optional control port)."""

    def __init__(self, scene: Scene, host: str = "127.0.0.1", port: int = 0, control_port: int | None = None,
                 transcript=None):
        self.scene = scene
        self.analyzer = SimulatedAnalyzer(scene)
        self.transcript = transcript  # optional callable(direction, line)
        try:
            self._listener = socket.create_server((host, port))
        except OSError as exc:
            raise OSError(f"cannot bind simulator to {host}:{port}: {exc}") from exc
        self._control = None
        if control_port is not None:
            try:
                self._control = socket.create_server((host, control_port))
            except OSError:
                self._listener.close()
                raise
        self._busy = threading.Lock()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._conns: set[socket.socket] = set()

    @property
    def address(self) -> tuple[str, int]:
        return self._listener.getsockname()[:2]

    @property
    def control_address(self) -> tuple[str, int] | None:
        return self._control.getsockname()[:2] if self._control else None

    def start(self) -> SimulatorServer:
        self._spawn(self._accept_loop, self._listener, self._serve_instrument)
        if self._control is not None:
            self._spawn(self._accept_loop, self._control, self._serve_control)
        return self

    def serve_forever(self) -> None:
        self.start()
        try:
            self._stop.wait()
        finally:
            self.stop()

    def stop(self) -> None:
        self._stop.set()
        for s in [self._listener, self._control, *list(self._conns)]:
            if s is None:
                continue
            try:
                s.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            s.close()
        for t in self._threads:
            t.join(timeout=2)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def _spawn(self, fn, *args) -> None:
        t = threading.Thread(target=fn, args=args, daemon=True)
        t.start()
        self._threads.append(t)

    def _accept_loop(self, listener: socket.socket, handler) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = listener.accept()
            except OSError:
                return
            self._spawn(handler, conn)

    def _serve_instrument(self, conn: socket.socket) -> None:
        if not self._busy.acquire(blocking=False):
            try:
                conn.sendall(f"{dialect.error_frame(dialect.ERR_BUSY)}\n".encode())
            finally:
                conn.close()
            return
        self._conns.add(conn)
        try:
            self.analyzer.reset()
            self._line_loop(conn, self._instrument_line)
        finally:
            self._conns.discard(conn)
            conn.close()
            self._busy.release()

    def _instrument_line(self, line: str) -> str:
        if self.transcript:
            self.transcript("RECEIVED", line)
        reply = self.analyzer.handle(line)
        if self.transcript:
            self.transcript("SENT", reply)
        return reply

    def _serve_control(self, conn: socket.socket) -> None:
        self._conns.add(conn)
        try:
            self._line_loop(conn, lambda line: handle_control(self.scene, line))
        finally:
            self._conns.discard(conn)
            conn.close()

    @staticmethod
    def _line_loop(conn: socket.socket, handler) -> None:
        with conn.makefile("r", encoding="utf-8", errors="replace", newline="\n") as rfile:
            for raw in rfile:
                reply = handler(raw.rstrip("\r\n"))
                try:
                    conn.sendall((reply + "\n").encode("utf-8"))
                except OSError:
                    return


def handle_control(scene: Scene, line: str) -> str:
    """Control dialect: ``ANT RBS|UE``, ``TRAFFIC ON UL|DL <mbps> [<seconds>]``,
    ``TRAFFIC OFF``, ``STATUS?``."""
    parts = line.strip().upper().split()
    try:
        if parts[:1] == ["ANT"] and len(parts) == 2:
            scene.point_antenna(Role(parts[1]))
            return dialect.OK
        if parts[:2] == ["TRAFFIC", "OFF"] and len(parts) == 2:
            scene.set_traffic(False)
            return dialect.OK
        if parts[:2] == ["TRAFFIC", "ON"] and len(parts) in (4, 5):
            until = scene.clock.now() + float(parts[4]) if len(parts) == 5 else None
            scene.set_traffic(True, Direction(parts[2]), float(parts[3]), until)
            return dialect.OK
        if parts == ["STATUS?"]:
            t = scene.traffic
            return (
                f"ANT={scene.antenna_target.value} TRAFFIC={'ON' if scene.traffic_active else 'OFF'} "
                f"DIR={t.direction.value} RATE={dialect.format_number(t.rate_mbps)}"
            )
    except (ValueError, KeyError):
        return dialect.error_frame(dialect.ERR_BAD_VALUE)
    return dialect.error_frame(dialect.ERR_MALFORMED)


def serve(scene: Scene, host: str = "127.0.0.1", port: int = 0, **kwargs) -> SimulatorServer:
    """Bind and start a simulator; returns the running server handle."""
    return SimulatorServer(scene, host, port, **kwargs).start()
