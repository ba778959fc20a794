"""Scenario builders for the four experiment families and the sweep runner.

Every sweep yields one CSV row per (mode, sweep value, seed).
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator

from .config import (MulticastMode, Role, ScenarioConfig, StationSpec, TrafficKind,
                     TrafficSource)
from .metrics import MetricsReport
from .mobility import RandomWaypoint, Static
from .sim import run

NEAR_AP_M = 10.0
DEFAULT_DURATION_S = 65.0
DEFAULT_WARMUP_S = 5.0
DEFAULT_SEEDS = 5
ALL_MODES = (MulticastMode.LEGACY, MulticastMode.LB_ARF, MulticastMode.RRAM)


def run_scenario(cfg: ScenarioConfig, trace=None) -> MetricsReport:
    return run(cfg, trace)


def _ring(n: int, radius: float, phase: float = 0.0) -> list[tuple[float, float]]:
    """``n`` points evenly spaced on a circle around the AP."""
    return [(round(radius * math.cos(phase + 2 * math.pi * i / max(n, 1)), 6),
             round(radius * math.sin(phase + 2 * math.pi * i / max(n, 1)), 6)) for i in range(n)]


def _assemble(mode, receivers, n_unicast, seed, duration_s, warmup_s, rate_fixed=None,
              **overrides) -> ScenarioConfig:
    stations = [StationSpec("ap", Role.AP, Static(0.0, 0.0))]
    for i, mob in enumerate(receivers):
        stations.append(StationSpec(f"rx{i}", Role.MULTICAST_RECEIVER, mob))
    traffic = [TrafficSource(TrafficKind.SATURATED_MULTICAST)]
    for i, (x, y) in enumerate(_ring(n_unicast, NEAR_AP_M, math.pi / max(n_unicast, 1))):
        stations.append(StationSpec(f"u{i}", Role.UNICAST_STATION, Static(x, y)))
        traffic.append(TrafficSource(TrafficKind.SATURATED_UNICAST, f"u{i}", "ap"))
    cfg = ScenarioConfig(duration_s=duration_s, warmup_s=warmup_s, seed=seed,
                         multicast_mode=MulticastMode(mode), rate_fixed=rate_fixed,
                         stations=tuple(stations), traffic=tuple(traffic))
    if overrides:
        cfg = cfg.with_(**overrides)
    cfg.validate()
    return cfg


def static_fairness(mode, n_unicast: int, seed: int = 1, duration_s=DEFAULT_DURATION_S,
                    warmup_s=DEFAULT_WARMUP_S, n_receivers: int = 5, **kw) -> ScenarioConfig:
    rx = [Static(x, y) for x, y in _ring(n_receivers, NEAR_AP_M)]
    return _assemble(mode, rx, n_unicast, seed, duration_s, warmup_s, rate_fixed=6, **kw)


def distance_fading(mode, distance_m: float, seed: int = 1, duration_s=DEFAULT_DURATION_S,
                    warmup_s=DEFAULT_WARMUP_S, n_receivers: int = 5, n_unicast: int = 2,
                    **kw) -> ScenarioConfig:
    near = _ring(n_receivers - 1, NEAR_AP_M)
    rx = [Static(x, y) for x, y in near] + [Static(float(distance_m), 0.0)]
    return _assemble(mode, rx, n_unicast, seed, duration_s, warmup_s, **kw)


def mobile(mode, n_receivers: int, v_max: float, seed: int = 1, duration_s=DEFAULT_DURATION_S,
           warmup_s=DEFAULT_WARMUP_S, n_unicast: int = 2, area_m: float = 60.0,
           pause_s: float = 1.0, **kw) -> ScenarioConfig:
    """One receiver pinned near the AP, the rest on random waypoint paths."""
    rwp = RandomWaypoint(width=area_m, height=area_m, v_min=min(0.1, v_max), v_max=v_max,
                         pause_s=pause_s, x0=-area_m / 2, y0=-area_m / 2)
    rx = [Static(NEAR_AP_M, 0.0)] + [rwp] * (n_receivers - 1)
    return _assemble(mode, rx, n_unicast, seed, duration_s, warmup_s, **kw)


@dataclass(frozen=True)
class Sweep:
    name: str
    variable: str
    values: tuple
    builder: object

    def configs(self, modes=ALL_MODES, seeds: Iterable[int] = range(1, DEFAULT_SEEDS + 1),
                **kw) -> Iterator[tuple[dict, ScenarioConfig]]:
        for mode in modes:
            for v in self.values:
                for seed in seeds:
                    key = {"mode": MulticastMode(mode).value, self.variable: v, "seed": seed}
                    yield key, self.builder(mode, v, seed=seed, **kw)


SWEEPS = {
    "static_fairness": Sweep("static_fairness", "n_unicast", (1, 5, 10, 15, 20), static_fairness),
    "distance_fading": Sweep("distance_fading", "distance_m", tuple(range(10, 161, 10)),
                             distance_fading),
    "mobile_scalability": Sweep("mobile_scalability", "n_receivers", (5, 10, 15, 20, 25),
                                lambda mode, n, **kw: mobile(mode, n, 3.0, **kw)),
    "speed": Sweep("speed", "v_max", (0.1, 1, 2, 3, 4, 5),
                   lambda mode, v, **kw: mobile(mode, 5, v, **kw)),
}

METRIC_COLUMNS = ("worst_loss", "best_thr_mbps", "worst_thr_mbps", "avg_mcast_thr_mbps",
                  "avg_ucast_thr_mbps", "avg_phy_rate_mbps", "thr_ratio", "mcast_packets",
                  "mcast_drops", "leader_changes", "conserved")


def _row(item) -> dict:
    key, cfg = item
    rep = run(cfg)
    row = dict(key)
    row.update(rep.scalar_row())
    row["conserved"] = rep.conserved
    return row


def run_sweep(name: str, modes=ALL_MODES, seeds: Iterable[int] = range(1, DEFAULT_SEEDS + 1),
              jobs: int = 1, **kw) -> list[dict]:
    sweep = SWEEPS[name]
    items = list(sweep.configs(modes, list(seeds), **kw))
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(_row, items))
    return [_row(it) for it in items]


def rows_to_csv(rows: list[dict], fh=None) -> str:
    out = fh or io.StringIO()
    if rows:
        cols = [c for c in rows[0] if c not in METRIC_COLUMNS] + list(METRIC_COLUMNS)
        w = csv.DictWriter(out, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: (f"{r[c]:.6f}" if isinstance(r[c], float) else r[c]) for c in cols})
    return out.getvalue() if fh is None else ""


def mean_by(rows: list[dict], *keys: str) -> dict:
    """Average every metric over seeds, grouped by ``keys``."""
    groups: dict = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in keys), []).append(r)
    return {k: {c: sum(float(r[c]) for r in rs) / len(rs) for c in METRIC_COLUMNS}
            for k, rs in groups.items()}
