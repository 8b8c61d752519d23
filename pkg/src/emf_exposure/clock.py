"""Injectable time sources.

Everything that waits or timestamps goes through a Clock, so a whole campaign
can run against SimulatedClock in milliseconds of wall time.
"""

from __future__ import annotations

import heapq
import itertools
import threading
import time
from typing import Callable, Protocol


class Timer(Protocol):
    def cancel(self) -> None: ...


class Clock(Protocol):
    def now(self) -> float: ...

    def sleep(self, seconds: float) -> None: ...

    def call_at(self, when: float, fn: Callable[[], None]) -> Timer: ...


class RealClock:
    """Wall-clock seconds since construction."""

    def __init__(self):
        self._t0 = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self._t0

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)

    def call_at(self, when: float, fn: Callable[[], None]) -> Timer:
        t = threading.Timer(max(0.0, when - self.now()), fn)
        t.daemon = True
        t.start()
        return t


class _SimTimer:
    __slots__ = ("when", "fn", "cancelled")

    def __init__(self, when: float, fn: Callable[[], None]):
        self.when = when
        self.fn = fn
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class SimulatedClock:
    """Manually advanced clock; sleep() advances time and fires due timers in order.

    Timers fire on the thread that advances the clock, at their exact due
    time (now() reads the due time inside the callback).
    """

    def __init__(self, start: float = 0.0):
        self._now = float(start)
        self._lock = threading.RLock()
        self._heap: list[tuple[float, int, _SimTimer]] = []
        self._seq = itertools.count()

    def now(self) -> float:
        with self._lock:
            return self._now

    def call_at(self, when: float, fn: Callable[[], None]) -> Timer:
        timer = _SimTimer(float(when), fn)
        with self._lock:
            heapq.heappush(self._heap, (timer.when, next(self._seq), timer))
        return timer

    def advance_to(self, target: float) -> None:
        while True:
            with self._lock:
                if not self._heap or self._heap[0][0] > target:
                    self._now = max(self._now, target)
                    return
                when, _, timer = heapq.heappop(self._heap)
                self._now = max(self._now, when)
            if not timer.cancelled:
                timer.fn()

    def advance(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("cannot move a clock backwards")
        self.advance_to(self.now() + seconds)

    def sleep(self, seconds: float) -> None:
        self.advance(max(0.0, seconds))

    def pending(self) -> int:
        with self._lock:
            return sum(1 for _, _, t in self._heap if not t.cancelled)
