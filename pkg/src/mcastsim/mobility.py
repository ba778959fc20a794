"""Static placement and the random waypoint model."""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass
from typing import Union


@dataclass(frozen=True)
class Static:
    x: float
    y: float

    def validate(self) -> list[tuple[str, str]]:
        return []


@dataclass(frozen=True)
class RandomWaypoint:
    """Legs toward uniform waypoints in ``[x0, x0+width] x [y0, y0+height]``,
    each followed by a fixed pause."""

    width: float = 60.0
    height: float = 60.0
    v_min: float = 0.1
    v_max: float = 3.0
    pause_s: float = 1.0
    x0: float = -30.0
    y0: float = -30.0

    def validate(self) -> list[tuple[str, str]]:
        errors = []
        if self.width <= 0 or self.height <= 0:
            errors.append(("width", "area must have positive width and height"))
        if not 0 < self.v_min <= self.v_max:
            errors.append(("v_min", "need 0 < v_min <= v_max"))
        if self.pause_s < 0:
            errors.append(("pause_s", "must be >= 0"))
        return errors

    def contains(self, x: float, y: float, eps: float = 1e-9) -> bool:
        return (self.x0 - eps <= x <= self.x0 + self.width + eps
                and self.y0 - eps <= y <= self.y0 + self.height + eps)


MobilityModel = Union[Static, RandomWaypoint]


class Trajectory:
    """Lazily generated, replayable path of one node.

    Breakpoints are ``(t, x, y)``; motion between consecutive breakpoints is
    linear.  Legs are drawn from ``rng`` strictly in time order, so the path
    depends only on the RNG seed, never on the query pattern.
    """

    def __init__(self, model: MobilityModel, rng: random.Random):
        self.model = model
        self.rng = rng
        if isinstance(model, Static):
            self._times = [0.0]
            self._points = [(model.x, model.y)]
        else:
            self._times = [0.0]
            self._points = [self._uniform_point()]

    def _uniform_point(self) -> tuple[float, float]:
        m = self.model
        return (m.x0 + self.rng.random() * m.width, m.y0 + self.rng.random() * m.height)

    def _extend(self, t: float) -> None:
        m = self.model
        while self._times[-1] <= t:
            x0, y0 = self._points[-1]
            x1, y1 = self._uniform_point()
            speed = self.rng.uniform(m.v_min, m.v_max)
            dist = math.hypot(x1 - x0, y1 - y0)
            t_arrive = self._times[-1] + dist / speed
            self._times.append(t_arrive)
            self._points.append((x1, y1))
            if m.pause_s > 0:
                self._times.append(t_arrive + m.pause_s)
                self._points.append((x1, y1))

    def position(self, t: float) -> tuple[float, float]:
        if t < 0:
            raise ValueError(f"negative time {t}")
        if isinstance(self.model, Static):
            return self._points[0]
        if t >= self._times[-1]:
            self._extend(t)
        i = bisect.bisect_right(self._times, t) - 1
        t0, t1 = self._times[i], self._times[i + 1]
        (x0, y0), (x1, y1) = self._points[i], self._points[i + 1]
        if t1 == t0:
            return x1, y1
        f = (t - t0) / (t1 - t0)
        return x0 + f * (x1 - x0), y0 + f * (y1 - y0)

    def legs(self, until: float):
        """Yield ``(t0, p0, t1, p1)`` for every segment up to ``until``."""
        if isinstance(self.model, Static):
            return
        self._extend(until)
        for i in range(len(self._times) - 1):
            if self._times[i] > until:
                break
            yield self._times[i], self._points[i], self._times[i + 1], self._points[i + 1]


def position_at(model: MobilityModel, node_id: int, t: float, seed: int) -> tuple[float, float]:
    """Stateless convenience wrapper; rebuilds the trajectory from the seed."""
    from .engine import rng_stream

    return Trajectory(model, rng_stream(seed, node_id, "mobility")).position(t)
