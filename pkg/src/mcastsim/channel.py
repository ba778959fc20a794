"""Propagation, SINR and the BER/PER reception model for 802.11a.

Path loss is log-distance, small-scale fading is Ricean block fading (one
power gain per frame per link).  Frame errors follow a per-rate logistic
BER curve applied segment by segment over the SINR seen during the frame.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable

from .frame_codec import MAX_RATE, MIN_RATE

# minimum SINR (dB) for each rate, 6 .. 54 Mbps
TARGET_SINR_DB = (6.02, 7.78, 9.03, 10.79, 17.04, 18.80, 24.05, 24.56)

CALIBRATION_BITS = 1500 * 8
CALIBRATION_PER = 0.01


def target_sinr(rate: int) -> float:
    if not MIN_RATE <= rate <= MAX_RATE:
        raise ValueError(f"rate index {rate} outside 0..{MAX_RATE}")
    return TARGET_SINR_DB[rate]


def f_of_sinr(sinr_db: float) -> int:
    """Highest rate index whose target SINR is strictly below ``sinr_db``.

    Falls back to the lowest rate when no rate qualifies.
    """
    best = MIN_RATE
    for rate, target in enumerate(TARGET_SINR_DB):
        if sinr_db > target:
            best = rate
    return best


@dataclass(frozen=True)
class ChannelParams:
    path_loss_exponent: float = 3.0
    ref_distance_m: float = 1.0
    ref_loss_db: float = 46.7  # free space at 1 m, 5.2 GHz
    ricean_k: float = 4.0  # linear; math.inf disables fading
    noise_floor_dbm: float = -100.0
    tx_power_dbm: float = 20.0
    ber_steepness: float = 1.5  # per dB
    cca_threshold_dbm: float = -82.0

    def validate(self) -> list[tuple[str, str]]:
        errors = []
        if not self.path_loss_exponent > 0:
            errors.append(("path_loss_exponent", "must be > 0"))
        if not self.ref_distance_m > 0:
            errors.append(("ref_distance_m", "must be > 0"))
        if not self.ricean_k >= 0:
            errors.append(("ricean_k", "must be >= 0"))
        if not self.ber_steepness > 0:
            errors.append(("ber_steepness", "must be > 0"))
        return errors


def path_loss_db(d_m: float, p: ChannelParams) -> float:
    if d_m <= 0:
        raise ValueError(f"distance must be positive, got {d_m}")
    d = max(d_m, p.ref_distance_m)
    return p.ref_loss_db + 10.0 * p.path_loss_exponent * math.log10(d / p.ref_distance_m)


def ricean_gain(k: float, rng: random.Random) -> float:
    """Unit-mean power gain |h|^2 of a Ricean channel with K-factor ``k``."""
    if math.isinf(k):
        return 1.0
    los = math.sqrt(k / (k + 1.0))
    sigma = math.sqrt(0.5 / (k + 1.0))
    x = los + sigma * rng.gauss(0.0, 1.0)
    y = sigma * rng.gauss(0.0, 1.0)
    return x * x + y * y


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    if mw <= 0:
        return -math.inf
    return 10.0 * math.log10(mw)


def sinr_db(rx_signal_dbm: float, noise_dbm: float, interferers_dbm: Iterable[float] = ()) -> float:
    denom = dbm_to_mw(noise_dbm) + sum(dbm_to_mw(i) for i in interferers_dbm)
    return 10.0 * math.log10(dbm_to_mw(rx_signal_dbm) / denom)


@dataclass(frozen=True)
class SinrTrace:
    """Piecewise-constant SINR over one frame: ``(start_us, end_us, sinr_db)``."""

    segments: tuple

    def __post_init__(self):
        segs = tuple(tuple(s) for s in self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValueError("empty SINR trace")
        for (s0, e0, _), (s1, _, _) in zip(segs, segs[1:]):
            if e0 != s1:
                raise ValueError(f"segments not contiguous at {e0} / {s1}")
        for s, e, _ in segs:
            if e <= s:
                raise ValueError(f"empty or reversed segment [{s}, {e}]")

    @classmethod
    def constant(cls, sinr: float, airtime_us: float = 1.0) -> "SinrTrace":
        return cls(((0.0, airtime_us, sinr),))

    @property
    def span(self) -> float:
        return self.segments[-1][1] - self.segments[0][0]

    @property
    def min_sinr(self) -> float:
        return min(s for _, _, s in self.segments)


class BerModel:
    """Logistic BER curves anchored on the target-SINR table.

    ``BER_r(s) = 0.5 / (1 + exp(a (s - m_r)))``; the midpoints ``m_r`` are
    solved so that a 1500-byte frame at ``target_sinr(r)`` has 1% PER.
    """

    def __init__(self, steepness: float = 1.5):
        self.steepness = steepness
        ber_at_target = -math.expm1(math.log1p(-CALIBRATION_PER) / CALIBRATION_BITS)
        offset = math.log(0.5 / ber_at_target - 1.0) / steepness
        self.midpoints = tuple(t - offset for t in TARGET_SINR_DB)

    def ber(self, rate: int, sinr: float) -> float:
        z = self.steepness * (sinr - self.midpoints[rate])
        if z > 700:
            return 0.0
        return 0.5 / (1.0 + math.exp(z))

    def log_success(self, rate: int, sinr: float, bits: float) -> float:
        return bits * math.log1p(-self.ber(rate, sinr))

    def success_probability(self, trace: SinrTrace, rate: int, length_bits: int) -> float:
        if length_bits <= 0:
            raise ValueError("length_bits must be positive")
        span = trace.span
        total = 0.0
        for start, end, s in trace.segments:
            total += self.log_success(rate, s, length_bits * (end - start) / span)
        return math.exp(total)

    def per(self, trace: SinrTrace, rate: int, length_bits: int) -> float:
        return 1.0 - self.success_probability(trace, rate, length_bits)


_DEFAULT_MODELS: dict = {}


def ber_model(steepness: float = 1.5) -> BerModel:
    model = _DEFAULT_MODELS.get(steepness)
    if model is None:
        model = _DEFAULT_MODELS[steepness] = BerModel(steepness)
    return model


def frame_success(trace: SinrTrace, rate: int, length_bits: int, rng: random.Random,
                  model: BerModel | None = None) -> bool:
    model = model or ber_model()
    return rng.random() < model.success_probability(trace, rate, length_bits)
