"""Simulated clock and discrete-event scheduler.

Events fire in (time, insertion-sequence) order, so a run is a pure
function of the scenario seed: no wall time, no thread interleaving.
"""

from __future__ import annotations

import heapq
from typing import Callable


class SimClock:
    def __init__(self, start_ms: int = 0):
        self._now = start_ms

    def now_ms(self) -> int:
        return self._now

    def _advance(self, t: int) -> None:
        assert t >= self._now
        self._now = t


class Scheduler:
    def __init__(self, clock: SimClock):
        self.clock = clock
        self._heap: list[tuple[int, int, Callable[[], None]]] = []
        self._seq = 0
        self.processed = 0

    def at(self, time_ms: int, fn: Callable[[], None]) -> None:
        if time_ms < self.clock.now_ms():
            time_ms = self.clock.now_ms()
        self._seq += 1
        heapq.heappush(self._heap, (time_ms, self._seq, fn))

    def after(self, delay_ms: int, fn: Callable[[], None]) -> None:
        self.at(self.clock.now_ms() + max(0, delay_ms), fn)

    def run_until(self, end_ms: int) -> None:
        while self._heap and self._heap[0][0] <= end_ms:
            time_ms, _, fn = heapq.heappop(self._heap)
            self.clock._advance(time_ms)
            self.processed += 1
            fn()
        self.clock._advance(end_ms)
