"""Multicast PHY rate controllers.

* ARF: up one rate after 10 consecutive ACKs or when the timer expires,
  down one rate after two consecutive losses.  Used as-is for unicast
  stations and, driven by the leader's ACKs, as LB-ARF for multicast.
* RRAM: ARF-like success/failure counting where the step after seven
  successes is gated on the leader's ACK SINR, and the rate increase is
  first announced through the TPR bits so that any receiver that cannot
  sustain the new rate vetoes it by colliding with the leader's ACK.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, NamedTuple

from .channel import f_of_sinr, target_sinr
from .frame_codec import MAX_RATE, MIN_RATE

ARF_SUCCESS_THRESHOLD = 10
ARF_FAILURE_THRESHOLD = 2
ARF_TIMER_US = 500_000


@dataclass(frozen=True)
class ArfState:
    rate: int
    consecutive_acks: int = 0
    consecutive_losses: int = 0
    timer_deadline: int = ARF_TIMER_US


def arf_init(rate: int, now: int = 0, timer_us: int = ARF_TIMER_US) -> ArfState:
    return ArfState(rate, 0, 0, now + timer_us)


def arf_on_outcome(st: ArfState, ok: bool, now: int, timer_us: int = ARF_TIMER_US) -> ArfState:
    if ok:
        acks, losses = st.consecutive_acks + 1, 0
    else:
        acks, losses = 0, st.consecutive_losses + 1
    if losses >= ARF_FAILURE_THRESHOLD:
        return ArfState(max(st.rate - 1, MIN_RATE), 0, 0, now + timer_us)
    if acks >= ARF_SUCCESS_THRESHOLD or now >= st.timer_deadline:
        return ArfState(min(st.rate + 1, MAX_RATE), 0, 0, now + timer_us)
    return ArfState(st.rate, acks, losses, st.timer_deadline)


class RramNode(enum.Enum):
    INIT = "Init"
    BASE = "Base"
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    S4 = "S4"
    S5 = "S5"
    S6 = "S6"
    S7 = "S7"
    S8 = "S8"
    S9 = "S9"
    S10 = "S10"
    F1 = "F1"
    F2 = "F2"


_SUCCESS_CHAIN = {
    RramNode.S1: RramNode.S2,
    RramNode.S2: RramNode.S3,
    RramNode.S3: RramNode.S4,
    RramNode.S4: RramNode.S5,
    RramNode.S5: RramNode.S6,
    RramNode.S6: RramNode.S7,
}
PROBE_NODES = (RramNode.S8, RramNode.S9)


class OutcomeKind(enum.Enum):
    SUCCESS = "success"
    ACK_COLLISION = "ack-collision"
    FAILURE = "failure"


class TxOutcome(NamedTuple):
    kind: OutcomeKind
    ack_sinr_db: float | None = None

    @classmethod
    def success(cls, sinr: float) -> "TxOutcome":
        return cls(OutcomeKind.SUCCESS, sinr)


FAILURE = TxOutcome(OutcomeKind.FAILURE)
ACK_COLLISION = TxOutcome(OutcomeKind.ACK_COLLISION)


@dataclass(frozen=True)
class RramState:
    node: RramNode
    rate: int
    tpr: int

    def __post_init__(self):
        if not MIN_RATE <= self.rate <= self.tpr <= MAX_RATE:
            raise ValueError(f"need {MIN_RATE} <= rate <= tpr <= {MAX_RATE}: {self}")
        if self.tpr != self.rate and self.node not in PROBE_NODES:
            raise ValueError(f"tpr above rate outside a probe: {self}")
        if self.node is RramNode.F2:
            raise ValueError("F2 is transient; the decrease lands in Base")


def rram_init(leader_sinr_db: float) -> RramState:
    rate = f_of_sinr(leader_sinr_db)
    return RramState(RramNode.INIT, rate, rate)


def _decrease(rate: int) -> RramState:
    # F2 entry action
    lower = max(rate - 1, MIN_RATE)
    return RramState(RramNode.BASE, lower, lower)


def rram_on_outcome(st: RramState, out: TxOutcome) -> RramState:
    """One step of the RRAM state machine.

    S8 and S9 are both "probe in flight": the frame carries the raised TPR
    and its outcome decides whether the rate moves up.  An ACK collision
    outside a probe has no meaning here and is rejected.
    """
    node, rate = st.node, st.rate

    if out.kind is OutcomeKind.FAILURE:
        if node in PROBE_NODES:
            return RramState(RramNode.F1, rate, rate)
        if node is RramNode.S10:
            return _decrease(rate)
        if node is RramNode.F1:
            if rate == MIN_RATE:
                return st
            return _decrease(rate)
        return RramState(RramNode.F1, rate, rate)

    if out.kind is OutcomeKind.ACK_COLLISION:
        if node not in PROBE_NODES:
            raise ValueError(f"ACK collision reported outside a probe (node {node.value})")
        return RramState(RramNode.S7, rate, rate)

    if out.kind is not OutcomeKind.SUCCESS or out.ack_sinr_db is None:
        raise ValueError(f"malformed outcome {out!r}")

    if node in (RramNode.INIT, RramNode.BASE, RramNode.F1, RramNode.S10):
        return RramState(RramNode.S1, rate, rate)
    if node is RramNode.S1 and rate == MAX_RATE:
        return st
    if node in _SUCCESS_CHAIN:
        return RramState(_SUCCESS_CHAIN[node], rate, rate)
    if node is RramNode.S7:
        if rate < MAX_RATE and out.ack_sinr_db > target_sinr(rate + 1):
            return RramState(RramNode.S8, rate, rate + 1)
        return st
    if node in PROBE_NODES:
        return RramState(RramNode.S10, st.tpr, st.tpr)
    raise ValueError(f"unknown node {node}")


def frame_tpr(st: RramState) -> int:
    return st.tpr


def receiver_ack_decision(frame_tpr: int, current_rate: int, own_sinr_db: float, is_leader: bool) -> bool:
    if is_leader:
        return True
    return frame_tpr > current_rate and own_sinr_db < target_sinr(frame_tpr)


# -- controllers used by the AP ------------------------------------------------

TransitionLog = Callable[[dict], None]


class FixedRateController:
    """Legacy multicast, or a leader-based scheme with adaptation switched off."""

    name = "fixed"

    def __init__(self, rate: int = MIN_RATE):
        self.rate = rate
        self.tpr = rate

    def on_outcome(self, out: TxOutcome, now: int) -> None:
        pass

    def on_leader_change(self, leader_sinr_db: float, now: int) -> None:
        pass


class LbArfController:
    name = "lb-arf"

    def __init__(self, rate: int = MIN_RATE, now: int = 0, timer_us: int = ARF_TIMER_US,
                 log: TransitionLog | None = None):
        self.timer_us = timer_us
        self.state = arf_init(rate, now, timer_us)
        self.log = log

    @property
    def rate(self) -> int:
        return self.state.rate

    @property
    def tpr(self) -> int:
        return self.state.rate

    def on_outcome(self, out: TxOutcome, now: int) -> None:
        # a collided ACK window means the leader's ACK was not heard
        ok = out.kind is OutcomeKind.SUCCESS
        old = self.state
        self.state = arf_on_outcome(old, ok, now, self.timer_us)
        if self.log is not None and old.rate != self.state.rate:
            self.log({"ctl": self.name, "outcome": out.kind.value, "rate": self.state.rate, "old_rate": old.rate})

    def on_leader_change(self, leader_sinr_db: float, now: int) -> None:
        pass


class RramController:
    name = "rram"

    def __init__(self, rate: int = MIN_RATE, log: TransitionLog | None = None):
        self.state = RramState(RramNode.INIT, rate, rate)
        self.log = log

    @property
    def rate(self) -> int:
        return self.state.rate

    @property
    def tpr(self) -> int:
        return frame_tpr(self.state)

    @property
    def probing(self) -> bool:
        return self.state.node in PROBE_NODES

    def on_outcome(self, out: TxOutcome, now: int) -> None:
        if out.kind is OutcomeKind.ACK_COLLISION and not self.probing:
            out = FAILURE
        old = self.state
        self.state = rram_on_outcome(old, out)
        if self.log is not None:
            self._log(old, out)

    def _log(self, old: RramState, out: TxOutcome) -> None:
        new = self.state
        self.log({
            "ctl": self.name,
            "old": old.node.value,
            "outcome": out.kind.value,
            "new": new.node.value,
            "rate": new.rate,
            "tpr": new.tpr,
        })

    def on_leader_change(self, leader_sinr_db: float, now: int) -> None:
        old = self.state
        self.state = rram_init(leader_sinr_db)
        if self.log is not None:
            self.log({"ctl": self.name, "old": old.node.value, "outcome": "leader-change",
                      "new": self.state.node.value, "rate": self.state.rate, "tpr": self.state.tpr})

