"""Scenario description and its YAML/dict loader.

A scenario file looks like::

    duration_s: 65
    warmup_s: 5
    seed: 1
    multicast_mode: rram          # legacy | lb-arf | rram
    rate_fixed: null              # Mbps, e.g. 6 to switch adaptation off
    channel: {ricean_k: 4.0, tx_power_dbm: 20.0}
    dcf: {cw_min: 15}
    lep: {report_period_s: 1.0}
    stations:
      - {name: ap, role: ap, mobility: {static: [0, 0]}}
      - {name: rx0, role: multicast_receiver, mobility: {static: [10, 0]}}
      - name: rx1
        role: multicast_receiver
        mobility: {random_waypoint: {width: 60, height: 60, x0: -30, y0: -30, v_max: 3, pause_s: 1}}
      - {name: u0, role: unicast_station, mobility: {static: [0, 10]}}
    traffic:
      - {kind: saturated_multicast, packet_bytes: 1500}
      - {kind: saturated_unicast, src: u0, dst: ap, packet_bytes: 1500}

Every validation problem is reported with the path of the offending field.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any

import yaml

from .channel import ChannelParams
from .frame_codec import RATES_MBPS
from .mac import DcfParams
from .mobility import MobilityModel, RandomWaypoint, Static

DEFAULT_PACKET_BYTES = 1500
DEFAULT_GROUP = "239.1.1.1"


class ConfigError(ValueError):
    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{path}: {msg}" for path, msg in problems))


class MulticastMode(enum.Enum):
    LEGACY = "legacy"
    LB_ARF = "lb-arf"
    RRAM = "rram"


class Role(enum.Enum):
    AP = "ap"
    MULTICAST_RECEIVER = "multicast_receiver"
    UNICAST_STATION = "unicast_station"


class TrafficKind(enum.Enum):
    SATURATED_UNICAST = "saturated_unicast"
    MULTICAST_CBR = "multicast_cbr"
    SATURATED_MULTICAST = "saturated_multicast"


@dataclass(frozen=True)
class StationSpec:
    name: str
    role: Role
    mobility: MobilityModel = Static(0.0, 0.0)
    legacy_igmp: bool = False


@dataclass(frozen=True)
class TrafficSource:
    kind: TrafficKind
    src: str | None = None
    dst: str | None = None
    packet_bytes: int = DEFAULT_PACKET_BYTES
    interval_s: float | None = None


@dataclass(frozen=True)
class LepParams:
    report_period_s: float = 1.0
    confirm_timeout_s: float = 0.05
    reelection_window_s: float = 0.05
    gsq_retry_limit: int = 3
    # smoothing of the per-frame SNR a receiver uses for TPR checks
    sinr_ewma_alpha: float = 0.1
    # what a membership report carries: the last frame's SNR or the smoothed one
    report_sinr: str = "last"

    def validate(self) -> list[tuple[str, str]]:
        errors = []
        for name in ("report_period_s", "confirm_timeout_s", "reelection_window_s"):
            if not getattr(self, name) > 0:
                errors.append((name, "must be > 0"))
        if self.gsq_retry_limit < 0:
            errors.append(("gsq_retry_limit", "must be >= 0"))
        if not 0 < self.sinr_ewma_alpha <= 1:
            errors.append(("sinr_ewma_alpha", "must be in (0, 1]"))
        if self.report_sinr not in ("last", "ewma"):
            errors.append(("report_sinr", "must be 'last' or 'ewma'"))
        return errors


@dataclass(frozen=True)
class ScenarioConfig:
    duration_s: float = 65.0
    warmup_s: float = 5.0
    seed: int = 1
    multicast_mode: MulticastMode = MulticastMode.RRAM
    rate_fixed: float | None = None
    channel: ChannelParams = ChannelParams()
    dcf: DcfParams = DcfParams()
    lep: LepParams = LepParams()
    arf_timer_s: float = 0.5
    group_addr: str = DEFAULT_GROUP
    stations: tuple = ()
    traffic: tuple = ()

    def validate(self) -> None:
        problems = []
        if self.duration_s < 0:
            problems.append(("duration_s", "must be >= 0"))
        if self.warmup_s < 0:
            problems.append(("warmup_s", "must be >= 0"))
        if self.rate_fixed is not None and int(self.rate_fixed) not in RATES_MBPS:
            problems.append(("rate_fixed", f"must be one of {RATES_MBPS}"))
        if not self.arf_timer_s > 0:
            problems.append(("arf_timer_s", "must be > 0"))
        for prefix, sub in (("channel", self.channel), ("dcf", self.dcf), ("lep", self.lep)):
            problems += [(f"{prefix}.{p}", m) for p, m in sub.validate()]

        if self.stations:
            aps = [i for i, s in enumerate(self.stations) if s.role is Role.AP]
            if len(aps) != 1:
                problems.append(("stations", f"need exactly one AP, found {len(aps)}"))
        names = set()
        for i, s in enumerate(self.stations):
            if s.name in names:
                problems.append((f"stations[{i}].name", f"duplicate name {s.name!r}"))
            names.add(s.name)
            problems += [(f"stations[{i}].mobility.{p}", m) for p, m in s.mobility.validate()]

        roles = {s.name: s.role for s in self.stations}
        for i, t in enumerate(self.traffic):
            path = f"traffic[{i}]"
            if t.packet_bytes <= 0 or t.packet_bytes > 2304:
                problems.append((f"{path}.packet_bytes", "must be in 1..2304"))
            if t.kind is TrafficKind.SATURATED_UNICAST:
                if roles.get(t.src) is not Role.UNICAST_STATION:
                    problems.append((f"{path}.src", f"{t.src!r} is not a unicast station"))
                if roles.get(t.dst) is not Role.AP:
                    problems.append((f"{path}.dst", "unicast traffic goes to the AP"))
            if t.kind is TrafficKind.MULTICAST_CBR and not (t.interval_s and t.interval_s > 0):
                problems.append((f"{path}.interval_s", "CBR needs a positive interval"))
        if sum(t.kind is not TrafficKind.SATURATED_UNICAST for t in self.traffic) > 1:
            problems.append(("traffic", "at most one multicast source"))
        if problems:
            raise ConfigError(problems)

    def station_index(self, name: str) -> int:
        for i, s in enumerate(self.stations):
            if s.name == name:
                return i
        raise KeyError(name)

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


# -- loading -------------------------------------------------------------------

def _build_params(cls, data: Any, path: str, problems: list):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        problems.append((path, "expected a mapping"))
        return cls()
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            problems.append((f"{path}.{key}", "unknown field"))
            continue
        default = getattr(cls(), key)
        if isinstance(default, (bool, str)) or default is None:
            kwargs[key] = value
            continue
        if isinstance(value, str) and value.lower() in ("inf", "infinity"):
            value = math.inf
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            problems.append((f"{path}.{key}", f"expected a number, got {value!r}"))
            continue
        kwargs[key] = type(default)(value) if isinstance(default, int) and float(value).is_integer() else value
    return cls(**kwargs)


def _build_mobility(data: Any, path: str, problems: list) -> MobilityModel:
    if not isinstance(data, dict) or len(data) != 1:
        problems.append((path, "expected {static: [x, y]} or {random_waypoint: {...}}"))
        return Static(0.0, 0.0)
    (kind, body), = data.items()
    if kind == "static":
        if not (isinstance(body, (list, tuple)) and len(body) == 2):
            problems.append((f"{path}.static", "expected [x, y]"))
            return Static(0.0, 0.0)
        x = _number(float, body[0], f"{path}.static[0]", problems)
        y = _number(float, body[1], f"{path}.static[1]", problems)
        return Static(x or 0.0, y or 0.0)
    if kind == "random_waypoint":
        return _build_params(RandomWaypoint, body, f"{path}.random_waypoint", problems)
    problems.append((path, f"unknown mobility kind {kind!r}"))
    return Static(0.0, 0.0)


def _enum(cls, value, path: str, problems: list):
    try:
        return cls(value)
    except ValueError:
        problems.append((path, f"expected one of {[m.value for m in cls]}, got {value!r}"))
        return None


def _number(cast, value, path: str, problems: list):
    if isinstance(value, bool):
        problems.append((path, f"expected a number, got {value!r}"))
        return None
    try:
        return cast(value)
    except (TypeError, ValueError):
        problems.append((path, f"expected a number, got {value!r}"))
        return None


_TOP_LEVEL = {"duration_s", "warmup_s", "seed", "multicast_mode", "rate_fixed", "channel", "dcf",
              "lep", "arf_timer_s", "group_addr", "stations", "traffic"}


def config_from_dict(data: dict) -> ScenarioConfig:
    problems: list[tuple[str, str]] = []
    if not isinstance(data, dict):
        raise ConfigError([("", "scenario must be a mapping")])
    for key in data:
        if key not in _TOP_LEVEL:
            problems.append((key, "unknown field"))

    stations = []
    for i, s in enumerate(data.get("stations") or []):
        path = f"stations[{i}]"
        if not isinstance(s, dict):
            problems.append((path, "expected a mapping"))
            continue
        role = _enum(Role, s.get("role"), f"{path}.role", problems)
        name = s.get("name", f"n{i}")
        mobility = _build_mobility(s.get("mobility", {"static": [0, 0]}), f"{path}.mobility", problems)
        stations.append(StationSpec(str(name), role, mobility, bool(s.get("legacy_igmp", False))))

    traffic = []
    for i, t in enumerate(data.get("traffic") or []):
        path = f"traffic[{i}]"
        if not isinstance(t, dict):
            problems.append((path, "expected a mapping"))
            continue
        kind = _enum(TrafficKind, t.get("kind"), f"{path}.kind", problems)
        size = _number(int, t.get("packet_bytes", DEFAULT_PACKET_BYTES), f"{path}.packet_bytes", problems)
        interval = t.get("interval_s")
        if interval is not None:
            interval = _number(float, interval, f"{path}.interval_s", problems)
        traffic.append(TrafficSource(kind, t.get("src"), t.get("dst"),
                                     DEFAULT_PACKET_BYTES if size is None else size, interval))

    mode = _enum(MulticastMode, data.get("multicast_mode", "rram"), "multicast_mode", problems)
    numbers = {}
    for key, cast in (("duration_s", float), ("warmup_s", float), ("seed", int), ("arf_timer_s", float)):
        if key in data:
            value = _number(cast, data[key], key, problems)
            if value is not None:
                numbers[key] = value
    rate_fixed = data.get("rate_fixed")
    if rate_fixed is not None:
        rate_fixed = _number(float, rate_fixed, "rate_fixed", problems)
    cfg_kwargs = dict(
        numbers,
        multicast_mode=mode or MulticastMode.RRAM,
        rate_fixed=rate_fixed,
        channel=_build_params(ChannelParams, data.get("channel"), "channel", problems),
        dcf=_build_params(DcfParams, data.get("dcf"), "dcf", problems),
        lep=_build_params(LepParams, data.get("lep"), "lep", problems),
        group_addr=str(data.get("group_addr", DEFAULT_GROUP)),
        stations=tuple(stations),
        traffic=tuple(traffic),
    )
    # keep going past parse errors so one pass reports everything
    stations = [st for st in cfg_kwargs["stations"] if st.role is not None]
    traffic = [t for t in cfg_kwargs["traffic"] if t.kind is not None]
    cfg = ScenarioConfig(**dict(cfg_kwargs, stations=tuple(stations), traffic=tuple(traffic)))
    try:
        cfg.validate()
    except ConfigError as exc:
        problems += exc.problems
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError([("", f"not valid YAML: {exc}")]) from None
    return config_from_dict({} if data is None else data)


def _mobility_to_dict(m: MobilityModel) -> dict:
    if isinstance(m, Static):
        return {"static": [m.x, m.y]}
    return {"random_waypoint": {f.name: getattr(m, f.name) for f in fields(m)}}


def _params_to_dict(p) -> dict:
    out = {}
    for f in fields(p):
        v = getattr(p, f.name)
        out[f.name] = "inf" if isinstance(v, float) and math.isinf(v) else v
    return out


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "duration_s": cfg.duration_s,
        "warmup_s": cfg.warmup_s,
        "seed": cfg.seed,
        "multicast_mode": cfg.multicast_mode.value,
        "rate_fixed": cfg.rate_fixed,
        "channel": _params_to_dict(cfg.channel),
        "dcf": _params_to_dict(cfg.dcf),
        "lep": _params_to_dict(cfg.lep),
        "arf_timer_s": cfg.arf_timer_s,
        "group_addr": cfg.group_addr,
        "stations": [
            {"name": s.name, "role": s.role.value, "mobility": _mobility_to_dict(s.mobility),
             **({"legacy_igmp": True} if s.legacy_igmp else {})}
            for s in cfg.stations
        ],
        "traffic": [
            {k: v for k, v in (("kind", t.kind.value), ("src", t.src), ("dst", t.dst),
                               ("packet_bytes", t.packet_bytes), ("interval_s", t.interval_s)) if v is not None}
            for t in cfg.traffic
        ],
    }


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


__all__ = [
    "ConfigError", "LepParams", "MulticastMode", "Role", "ScenarioConfig", "StationSpec",
    "TrafficKind", "TrafficSource", "config_from_dict", "config_to_dict", "dump_config", "load_config",
]
