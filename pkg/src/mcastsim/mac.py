"""802.11a DCF primitives: timing, contention window, ACK window outcomes."""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .channel import dbm_to_mw, mw_to_dbm
from .frame_codec import RATES_MBPS

PREAMBLE_US = 16
SIGNAL_US = 4
SYMBOL_US = 4
SERVICE_TAIL_BITS = 16 + 6

MAC_DATA_OVERHEAD = 24 + 4 + 8  # header, FCS, LLC/SNAP
ACK_BYTES = 14
MANDATORY_RATES = (0, 2, 4)  # 6, 12, 24 Mbps


@dataclass(frozen=True)
class DcfParams:
    slot_us: int = 9
    sifs_us: int = 16
    difs_us: int = 34
    cw_min: int = 15
    cw_max: int = 1023
    retry_limit: int = 7
    ack_timeout_us: int = 45

    def validate(self) -> list[tuple[str, str]]:
        errors = []
        for name in ("slot_us", "sifs_us", "difs_us", "ack_timeout_us"):
            if getattr(self, name) <= 0:
                errors.append((name, "must be > 0"))
        if not 0 < self.cw_min < self.cw_max:
            errors.append(("cw_min", "need 0 < cw_min < cw_max"))
        if self.retry_limit < 0:
            errors.append(("retry_limit", "must be >= 0"))
        return errors


def airtime_us(length_bytes: int, rate: int) -> int:
    """PPDU duration of an MPDU of ``length_bytes`` at rate index ``rate``."""
    bits_per_symbol = 4 * RATES_MBPS[rate]
    symbols = math.ceil((SERVICE_TAIL_BITS + 8 * length_bytes) / bits_per_symbol)
    return PREAMBLE_US + SIGNAL_US + SYMBOL_US * symbols


def ack_rate(data_rate: int) -> int:
    """Highest mandatory rate not above the data rate."""
    return max(r for r in MANDATORY_RATES if r <= data_rate)


def ack_airtime_us(data_rate: int) -> int:
    return airtime_us(ACK_BYTES, ack_rate(data_rate))


def nav_duration_us(data_rate: int, p: DcfParams) -> int:
    return p.sifs_us + ack_airtime_us(data_rate)


def cw_on_collision(cw: int, p: DcfParams = DcfParams()) -> int:
    return min(2 * (cw + 1) - 1, p.cw_max)


def cw_on_success(cw: int, p: DcfParams = DcfParams()) -> int:
    return p.cw_min


def draw_backoff(cw: int, rng: random.Random) -> int:
    return rng.randint(0, cw) if cw > 0 else 0


class AckKind(enum.Enum):
    OK = "ack-ok"
    COLLISION = "ack-collision"
    SILENCE = "silence"


class AckOutcome(NamedTuple):
    kind: AckKind
    sinr_db: float | None = None


class McastAckMode(enum.Enum):
    LEGACY = "legacy"
    LEADER_ACKED = "leader-acked"


class TxAction(enum.Enum):
    DONE = "done"
    RETRANSMIT = "retransmit"
    BACKOFF_AND_RETRANSMIT = "backoff-and-retransmit"


def multicast_tx_policy(mode: McastAckMode, outcome: AckOutcome) -> TxAction:
    if mode is McastAckMode.LEGACY:
        return TxAction.DONE
    if outcome.kind is AckKind.SILENCE:
        return TxAction.BACKOFF_AND_RETRANSMIT
    # AckOk, or an ACK collision during a rate probe: receivers did answer
    return TxAction.DONE


class AckReception(NamedTuple):
    decoded: bool
    energy_dbm: float
    sinr_db: float | None = None


def classify_ack_window(receptions: Iterable, cca_threshold_dbm: float = -82.0) -> AckOutcome:
    """Sort what the AP heard after a leader-acked data frame into ok / collision / silence."""
    receptions = [AckReception(*r) for r in receptions]
    decoded = [r for r in receptions if r.decoded]
    if len(decoded) == 1:
        return AckOutcome(AckKind.OK, decoded[0].sinr_db)
    if len(decoded) > 1:
        return AckOutcome(AckKind.COLLISION)
    energy = mw_to_dbm(sum(dbm_to_mw(r.energy_dbm) for r in receptions))
    if energy > cca_threshold_dbm:
        return AckOutcome(AckKind.COLLISION)
    return AckOutcome(AckKind.SILENCE)
