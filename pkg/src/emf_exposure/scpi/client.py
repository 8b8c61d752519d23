"""TCP client for the spectrum-analyzer dialect.

A handle is single-owner: one request in flight at a time, no retries (a
retried channel-power query would skew rolling-average semantics).
"""

from __future__ import annotations

import enum
import logging
import select
import socket
from dataclasses import dataclass

from ..clock import Clock, RealClock
from ..errors import (
    InstrumentError,
    OverRange,
    PreampRejected,
    QueryFailed,
    SettingsRejected,
    TransportError,
)
from ..model import SpectrumTrace
from ..units import FieldStrength, Frequency, Unit, convert
from . import dialect
from .settings import InstrumentSettings, _encode_value

log = logging.getLogger(__name__)

DEFAULT_PORT = 5025
DEFAULT_TIMEOUT = 5.0


class Direction(str, enum.Enum):
    SENT = "SENT"
    RECEIVED = "RECEIVED"


@dataclass(frozen=True)
class TranscriptEntry:
    direction: Direction
    line: str
    timestamp: float

    def format(self) -> str:
        return f"{self.timestamp:.3f} {self.direction.value} {self.line}"


def parse_address(text: str, default_port: int = DEFAULT_PORT) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep:
        return text, default_port
    try:
        return host or "127.0.0.1", int(port)
    except ValueError:
        raise ValueError(f"bad instrument address {text!r}") from None


class ScpiClient:
    def __init__(self, sock: socket.socket, clock: Clock | None = None, timeout: float = DEFAULT_TIMEOUT):
        self._sock = sock
        self._sock.settimeout(timeout)
        self._rfile = sock.makefile("r", encoding="utf-8", newline="\n")
        self.clock = clock or RealClock()
        self.transcript: list[TranscriptEntry] = []
        self._span: tuple[int, int] | None = None
        self.unit: Unit | None = None

    @classmethod
    def connect(
        cls,
        host: str,
        port: int,
        *,
        timeout: float = DEFAULT_TIMEOUT,
        clock: Clock | None = None,
    ) -> ScpiClient:
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
        # A busy single-client instrument answers an unsolicited ERR and hangs up.
        try:
            ready, _, _ = select.select([sock], [], [], 0.05)
            if ready:
                data = sock.recv(64, socket.MSG_PEEK)
                if not data or data.startswith(b"ERR"):
                    sock.close()
                    raise TransportError(f"{host}:{port} refused the session (busy)")
        except OSError as exc:
            sock.close()
            raise TransportError(str(exc)) from exc
        return cls(sock, clock=clock, timeout=timeout)

    def close(self) -> None:
        try:
            self._rfile.close()
        finally:
            self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # --- wire -----------------------------------------------------------

    def _record(self, direction: Direction, line: str) -> None:
        self.transcript.append(TranscriptEntry(direction, line, self.clock.now()))

    def request(self, line: str) -> str:
        """Send one line, return the response line. ERR frames raise InstrumentError."""
        if "\n" in line or "\r" in line:
            raise ValueError("command lines must not contain newlines")
        self._record(Direction.SENT, line)
        try:
            self._sock.sendall((line + "\n").encode("utf-8"))
            reply = self._rfile.readline()
        except (socket.timeout, TimeoutError) as exc:
            raise TransportError(f"timeout waiting for reply to {line!r}") from exc
        except OSError as exc:
            raise TransportError(f"connection lost: {exc}") from exc
        if not reply:
            raise TransportError("instrument closed the connection")
        reply = reply.rstrip("\r\n")
        self._record(Direction.RECEIVED, reply)
        code = dialect.parse_error(reply)
        if code == dialect.ERR_BUSY:
            raise TransportError("instrument busy with another client")
        if code is not None:
            if code == dialect.ERR_OVER_RANGE:
                raise OverRange(code, line)
            raise InstrumentError(code, line)
        return reply

    def _query_number(self, line: str) -> float:
        try:
            reply = self.request(line)
        except TransportError:
            raise
        except InstrumentError as exc:
            cls = OverRange if exc.code == dialect.ERR_OVER_RANGE else QueryFailed
            raise cls(exc.code, line) from None
        try:
            return dialect.parse_number(reply)
        except ValueError:
            raise QueryFailed(dialect.ERR_MALFORMED, line, f"bad numeric frame {reply!r}") from None

    def _set(self, field: str, line: str) -> None:
        try:
            reply = self.request(line)
        except TransportError:
            raise
        except InstrumentError as exc:
            raise SettingsRejected(exc.code, line, field) from None
        if reply != dialect.OK:
            raise SettingsRejected(dialect.ERR_MALFORMED, line, field)

    # --- operations -----------------------------------------------------

    def identify(self) -> str:
        return self.request(dialect.IDN)

    def apply_settings(self, settings: InstrumentSettings) -> int:
        """Send one line per non-AUTO field; returns the number of lines acknowledged."""
        lines = settings.encode()
        for field, line in lines:
            self._set(field, line)
        self._span = (settings.f_start.hertz, settings.f_stop.hertz)
        self.unit = Unit(settings.unit)
        return len(lines)

    def set_field(self, field: str, value) -> None:
        """Set a single instrument field (ref level, scale/div, ...)."""
        self._set(field, f"{dialect.SET_HEADERS[field]} {_encode_value(value)}")

    def set_ref_level(self, level: float) -> None:
        self.set_field("ref_level", float(level))

    def set_scale_div(self, scale: float) -> None:
        self.set_field("scale_div", float(scale))

    def set_preamp(self, on: bool) -> None:
        line = f"{dialect.SET_HEADERS['preamp']} {'ON' if on else 'OFF'}"
        try:
            self.request(line)
        except TransportError:
            raise
        except InstrumentError as exc:
            raise PreampRejected(exc.code, line, f"pre-amplifier change rejected (ERR {exc.code})") from None

    def reset_trace(self) -> None:
        self._set("trace", dialect.RESET_TRACE)

    def query_max_level(self, f_min: Frequency, f_max: Frequency) -> float:
        return self._query_number(f"{dialect.QUERY_MAX_LEVEL} {f_min.hertz} {f_max.hertz}")

    def query_channel_power(self, f_min: Frequency, f_max: Frequency) -> float:
        return self._query_number(f"{dialect.QUERY_CHANNEL_POWER} {f_min.hertz} {f_max.hertz}")

    def query_setting(self, field: str) -> str:
        return self.request(dialect.SET_HEADERS[field] + "?")

    def query_trace(self) -> SpectrumTrace:
        """Current trace; the grid is evenly spaced over the instrument span."""
        if self._span is None:
            start = int(dialect.parse_number(self.query_setting("f_start")))
            stop = int(dialect.parse_number(self.query_setting("f_stop")))
            self._span = (start, stop)
        start, stop = self._span
        try:
            reply = self.request(dialect.QUERY_TRACE)
        except TransportError:
            raise
        except InstrumentError as exc:
            raise QueryFailed(exc.code, dialect.QUERY_TRACE) from None
        try:
            values = [dialect.parse_number(v) for v in reply.split(",")]
        except ValueError:
            raise QueryFailed(dialect.ERR_MALFORMED, dialect.QUERY_TRACE, "bad trace frame") from None
        n = len(values)
        if n < 2:
            raise QueryFailed(dialect.ERR_MALFORMED, dialect.QUERY_TRACE, "trace too short")
        freqs = trace_grid(start, stop, n)
        if self.unit is Unit.DBM_M2:
            values = [convert(v, Unit.DBM_M2, Unit.VPM) for v in values]
        return SpectrumTrace(
            Frequency(start),
            Frequency(stop),
            tuple((Frequency(f), FieldStrength(max(0.0, v))) for f, v in zip(freqs, values)),
        )


def trace_grid(start: int, stop: int, n: int) -> list[int]:
    """Evenly spaced integer-Hz grid including both span edges."""
    return [start + (stop - start) * i // (n - 1) for i in range(n)]
