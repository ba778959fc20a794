"""Event queue and seeded RNG streams.

Simulation time is an integer number of microseconds.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from typing import Any, NamedTuple

US_PER_S = 1_000_000


class SimulationError(RuntimeError):
    pass


class Event(NamedTuple):
    time: int
    seq: int
    target: int
    kind: str
    payload: Any = None


class EventQueue:
    """Min-heap keyed on ``(time, insertion order)``."""

    def __init__(self):
        self._heap: list[Event] = []
        self._seq = 0
        self.now = 0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, time: int, target: int, kind: str, payload: Any = None) -> Event:
        if time < self.now:
            raise SimulationError(f"cannot schedule {kind!r} at t={time} before now={self.now}")
        ev = Event(int(time), self._seq, target, kind, payload)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return ev

    def advance(self) -> Event | None:
        """Pop the next event and move the clock; ``None`` once the queue is drained."""
        if not self._heap:
            return None
        ev = heapq.heappop(self._heap)
        if ev.time < self.now:
            raise SimulationError(f"event {ev} out of order (now={self.now})")
        self.now = ev.time
        return ev

    def peek_time(self) -> int | None:
        return self._heap[0].time if self._heap else None


def rng_stream(seed: int, node: int | str, purpose: str) -> random.Random:
    """Independent generator for one ``(node, purpose)`` pair under a master seed.

    Adding a node never shifts another node's draws.
    """
    digest = hashlib.sha256(f"{seed}/{node}/{purpose}".encode()).digest()
    return random.Random(int.from_bytes(digest[:16], "big"))


def seconds_to_us(s: float) -> int:
    return int(round(s * US_PER_S))
