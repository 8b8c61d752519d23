"""Bulk-transfer traffic sessions and their throughput logs.

Two backends sit behind the same start/stop/summarize surface:
`SimulatedLink` drives a simulator Scene in-process and samples on the
injected clock; `IperfBackend` runs an external iperf3 client and parses its
interval reports line by line.
"""

from __future__ import annotations

import enum
import logging
import re
import subprocess
import threading
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .analysis.stats import confidence_interval
from .clock import Clock, RealClock
from .model import Direction

log = logging.getLogger(__name__)


class TrafficState(str, enum.Enum):
    RUNNING = "RUNNING"
    STOPPED = "STOPPED"
    EXPIRED = "EXPIRED"
    FAILED = "FAILED"


@dataclass(frozen=True)
class TrafficSpec:
    direction: Direction = Direction.UL
    target_rate: float | None = None  # Mbps; None means as fast as the link allows
    duration: float = 120.0
    report_interval: float = 1.0
    parallel_streams: int = 1

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.report_interval <= 0:
            raise ValueError("report_interval must be positive")
        if self.parallel_streams < 1:
            raise ValueError("parallel_streams must be >= 1")
        if self.target_rate is not None and self.target_rate < 0:
            raise ValueError("target_rate must be >= 0")


class TrafficSession:
    """Handle on one transfer. Samples are appended by the backend in the background."""

    def __init__(self, spec: TrafficSpec, started_at: float, on_stop: Callable[[], None] | None = None):
        self.spec = spec
        self.started_at = started_at
        self._state = TrafficState.RUNNING
        self._samples: list[tuple[float, float]] = []
        self._lock = threading.Lock()
        self._on_stop = on_stop
        self.error: str | None = None

    @property
    def state(self) -> TrafficState:
        with self._lock:
            return self._state

    @property
    def running(self) -> bool:
        return self.state is TrafficState.RUNNING

    @property
    def samples(self) -> list[tuple[float, float]]:
        with self._lock:
            return list(self._samples)

    def add_sample(self, t: float, mbps: float) -> None:
        with self._lock:
            if self._state is TrafficState.RUNNING:
                self._samples.append((t, mbps))

    def _finish(self, state: TrafficState, error: str | None = None) -> bool:
        with self._lock:
            if self._state is not TrafficState.RUNNING:
                return False
            self._state = state
            self.error = error
        return True

    def expire(self) -> None:
        self._finish(TrafficState.EXPIRED)

    def fail(self, error: str) -> None:
        self._finish(TrafficState.FAILED, error)

    def stop(self) -> TrafficSession:
        """Idempotent; an EXPIRED or FAILED session keeps its state."""
        if self._finish(TrafficState.STOPPED) and self._on_stop:
            self._on_stop()
        return self


class Backend(Protocol):
    def start(self, spec: TrafficSpec) -> TrafficSession: ...


class TrafficController:
    def __init__(self, backend: Backend):
        self.backend = backend

    def start(self, spec: TrafficSpec) -> TrafficSession:
        return self.backend.start(spec)

    def stop(self, session: TrafficSession) -> TrafficSession:
        return session.stop()

    @staticmethod
    def summarize(session: TrafficSession) -> tuple[float, float]:
        """Mean throughput and its 95% half-width, Mbps."""
        return confidence_interval([r for _, r in session.samples])


# --- simulated link ----------------------------------------------------------


class SimulatedLink:
    """Link coupled to a simulator Scene; capacity comes from the scene config.

    Each report tick draws a realized rate around min(target, capacity),
    never above capacity, and pushes it to the scene so emission tracks it.
    """

    def __init__(self, scene, clock: Clock | None = None, seed: int = 0, rate_jitter: float = 0.02,
                 link_up: bool = True):
        self.scene = scene
        self.clock = clock or scene.clock
        self.rng = np.random.default_rng(seed)
        self.rate_jitter = rate_jitter
        self.link_up = link_up

    def start(self, spec: TrafficSpec) -> TrafficSession:
        t0 = self.clock.now()
        if not self.link_up:
            session = TrafficSession(spec, t0)
            session.fail("simulated link unreachable")
            return session
        cap = self.scene.capacity(spec.direction)
        base = cap if spec.target_rate is None else min(spec.target_rate, cap)
        end = t0 + spec.duration
        timers = []

        def on_stop():
            for t in timers:
                t.cancel()
            self.scene.set_traffic(False)

        session = TrafficSession(spec, t0, on_stop=on_stop)
        self.scene.set_traffic(True, spec.direction, base, until=end)

        def tick():
            if not session.running:
                return
            rate = min(cap, max(0.0, base * (1.0 + self.rate_jitter * self.rng.normal())))
            session.add_sample(self.clock.now(), rate)
            self.scene.set_traffic(True, spec.direction, rate, until=end)

        def expire():
            if session.running:
                session.expire()
                self.scene.set_traffic(False)

        n_ticks = int(spec.duration / spec.report_interval + 1e-9)
        for k in range(1, n_ticks + 1):
            timers.append(self.clock.call_at(t0 + k * spec.report_interval, tick))
        timers.append(self.clock.call_at(end, expire))
        return session


# --- external iperf3 ---------------------------------------------------------

_INTERVAL = re.compile(
    r"^\[\s*(?P<id>\d+|SUM)\]\s+(?P<t0>[\d.]+)-(?P<t1>[\d.]+)\s+sec\s+"
    r"[\d.]+\s+[KMGT]?Bytes\s+(?P<rate>[\d.]+)\s+(?P<prefix>[KMG]?)bits/sec"
)
_SCALE = {"": 1e-6, "K": 1e-3, "M": 1.0, "G": 1e3}


def parse_iperf_line(line: str, parallel_streams: int = 1) -> tuple[float, float] | None:
    """(interval end seconds, Mbps) for an interval report line, else None.

    End-of-test summary lines (sender/receiver) are skipped; with several
    streams only the [SUM] lines count.
    """
    if "sender" in line or "receiver" in line:
        return None
    m = _INTERVAL.match(line.strip())
    if not m:
        return None
    if (parallel_streams > 1) != (m.group("id") == "SUM"):
        return None
    return float(m.group("t1")), float(m.group("rate")) * _SCALE[m.group("prefix")]


def iperf_command(spec: TrafficSpec, host: str, port: int = 5201, executable: str = "iperf3") -> list[str]:
    cmd = [
        executable, "-c", host, "-p", str(port),
        "-t", str(int(round(spec.duration))),
        "-i", f"{spec.report_interval:g}",
        "-P", str(spec.parallel_streams),
        "-f", "m", "--forceflush",
    ]
    if spec.direction is Direction.DL:
        cmd.append("-R")
    if spec.target_rate is not None:
        cmd += ["-b", f"{spec.target_rate:g}M"]
    return cmd


class IperfBackend:
    """Runs an iperf3-compatible client; best effort, real clock."""

    def __init__(self, host: str, port: int = 5201, executable: str = "iperf3", clock: Clock | None = None):
        self.host = host
        self.port = port
        self.executable = executable
        self.clock = clock or RealClock()

    def start(self, spec: TrafficSpec) -> TrafficSession:
        t0 = self.clock.now()
        cmd = iperf_command(spec, self.host, self.port, self.executable)
        try:
            proc = subprocess.Popen(cmd, stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True)
        except OSError as exc:
            session = TrafficSession(spec, t0)
            session.fail(f"cannot run {cmd[0]}: {exc}")
            return session

        session = TrafficSession(spec, t0, on_stop=proc.terminate)

        def reader():
            assert proc.stdout is not None
            for line in proc.stdout:
                parsed = parse_iperf_line(line, spec.parallel_streams)
                if parsed:
                    session.add_sample(t0 + parsed[0], parsed[1])
            rc = proc.wait()
            if rc == 0:
                session.expire()
            else:
                session.fail(f"{cmd[0]} exited with status {rc}")

        threading.Thread(target=reader, daemon=True).start()
        return session
