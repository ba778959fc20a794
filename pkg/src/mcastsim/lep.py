"""Leader election over modified IGMP.

AP and station sides are pure transition functions: each takes the current
state and an input and returns the new state plus whatever message must be
sent.  Timers and delivery belong to the caller.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import NamedTuple

from .frame_codec import IgmpKind, IgmpMessage, quantize_sinr

REPORT_PERIOD_US = 1_000_000
CONFIRM_TIMEOUT_US = 50_000
REELECTION_WINDOW_US = 50_000
GSQ_RETRY_LIMIT = 3


class MemberRecord(NamedTuple):
    mac: int
    group_addr: int
    last_sinr_q: int
    last_report_time: int


@dataclass(frozen=True)
class Idle:
    pass


@dataclass(frozen=True)
class AwaitingConfirm:
    candidate_sinr_q: int
    duplicated: bool
    retries: int = 0
    # the election is about members at this SINR; the candidate differs
    # from it only while confirming a reelection winner's random value
    worst_sinr_q: int | None = None
    tie: bool = False

    @property
    def topic(self) -> tuple:
        worst = self.candidate_sinr_q if self.worst_sinr_q is None else self.worst_sinr_q
        return worst, self.tie


@dataclass(frozen=True)
class AwaitingReelection:
    worst_sinr_q: int
    pending_randoms: tuple = ()  # (mac, random) pairs

    @property
    def topic(self) -> tuple:
        return self.worst_sinr_q, True


@dataclass(frozen=True)
class ApLepState:
    group_addr: int
    ap_addr: int
    members: dict = field(default_factory=dict)
    phase: object = Idle()
    current_leader: int | None = None
    gsq_retry_limit: int = GSQ_RETRY_LIMIT
    ignored_reports: int = 0

    def worst(self) -> tuple[int | None, tuple]:
        if not self.members:
            return None, ()
        low = min(r.last_sinr_q for r in self.members.values())
        return low, tuple(sorted(m for m, r in self.members.items() if r.last_sinr_q == low))

    def leader_sinr_q(self) -> int | None:
        rec = self.members.get(self.current_leader)
        return rec.last_sinr_q if rec else None


def _gsq(st: ApLepState, payload: int, d_bit: int) -> IgmpMessage:
    return IgmpMessage.query(st.group_addr, st.ap_addr, payload, d_bit)


def ap_on_report(msg: IgmpMessage, st: ApLepState, mac: int, now: int = 0):
    """Handle a membership report from ``mac``; returns ``(state, gsq_or_None)``."""
    if not msg.kind.is_report:
        raise ValueError(f"not a report: {msg.kind}")
    if msg.group_addr != st.group_addr:
        return replace(st, ignored_reports=st.ignored_reports + 1), None
    if msg.kind is IgmpKind.LEGACY_REPORT or msg.mrt_octet == 0:
        return st, None

    phase = st.phase
    if msg.d_bit == 1:
        # reelection vote: never touches the SINR statistics
        if isinstance(phase, AwaitingConfirm) and phase.duplicated:
            return replace(st, phase=AwaitingReelection(phase.topic[0], ((mac, msg.payload7),))), None
        if isinstance(phase, AwaitingReelection):
            votes = tuple(v for v in phase.pending_randoms if v[0] != mac) + ((mac, msg.payload7),)
            return replace(st, phase=replace(phase, pending_randoms=votes)), None
        return st, None

    confirming = (isinstance(phase, AwaitingConfirm) and not phase.duplicated
                  and msg.payload7 == phase.candidate_sinr_q)
    if confirming and phase.tie:
        # echo of the winning random; not an SINR, so members stay untouched
        return replace(st, phase=Idle(), current_leader=mac), None

    members = dict(st.members)
    members[mac] = MemberRecord(mac, msg.group_addr, msg.payload7, now)
    st = replace(st, members=members)
    low, worst_set = st.worst()
    # a report equal to the candidate confirms only if it leaves the election as it was;
    # otherwise it is a newcomer at the same SINR and turns the election into a tie
    if confirming and mac in worst_set and phase.topic == (low, len(worst_set) > 1):
        return replace(st, phase=Idle(), current_leader=mac), None
    if st.current_leader in worst_set:
        return replace(st, phase=Idle()), None
    tie = len(worst_set) > 1
    if isinstance(phase, (AwaitingConfirm, AwaitingReelection)) and phase.topic == (low, tie):
        return st, None
    phase = AwaitingConfirm(low, tie, 0, low, tie)
    return replace(st, phase=phase), _gsq(st, low, int(tie))


def ap_confirmation_timeout(st: ApLepState):
    phase = st.phase
    if not isinstance(phase, AwaitingConfirm):
        return st, None
    if phase.retries >= st.gsq_retry_limit:
        return replace(st, phase=Idle()), None
    d_bit = 1 if phase.duplicated else 0
    return replace(st, phase=replace(phase, retries=phase.retries + 1)), _gsq(st, phase.candidate_sinr_q, d_bit)


def ap_resolve_reelection(st: ApLepState):
    """Close the reelection window: echo the largest random with D = 0.

    When the largest value was drawn by more than one station the round is
    repeated with a fresh D = 1 query.
    """
    phase = st.phase
    if not isinstance(phase, AwaitingReelection):
        return st, None
    if not phase.pending_randoms:
        return replace(st, phase=Idle()), None
    top = max(r for _, r in phase.pending_randoms)
    holders = [m for m, r in phase.pending_randoms if r == top]
    if len(holders) > 1:
        new_phase = AwaitingConfirm(phase.worst_sinr_q, True, 0, phase.worst_sinr_q, True)
        return replace(st, phase=new_phase), _gsq(st, phase.worst_sinr_q, 1)
    new_phase = AwaitingConfirm(top, False, 0, phase.worst_sinr_q, True)
    return replace(st, phase=new_phase), _gsq(st, top, 0)


def ap_refresh_leader(st: ApLepState):
    """Re-announce the current leader after ACKs from two self-declared leaders collided.

    A station that missed the query which demoted it keeps acknowledging;
    a repeated query for the leader's SINR makes it step down.
    """
    if not isinstance(st.phase, Idle) or st.current_leader not in st.members:
        return st, None
    q = st.leader_sinr_q()
    tie = sum(r.last_sinr_q == q for r in st.members.values()) > 1
    phase = AwaitingConfirm(q, tie, 0, q, tie)
    return replace(st, phase=phase), _gsq(st, q, int(tie))


# -- station side --------------------------------------------------------------

@dataclass(frozen=True)
class StationLepState:
    last_reported_sinr_q: int | None = None
    is_leader: bool = False
    pending_random: int | None = None
    legacy: bool = False
    # payload this station confirmed with; lets it re-confirm a repeated GSQ
    leader_token: int | None = None


def station_periodic_report(st: StationLepState, current_sinr_db: float, group_addr: int, own_addr: int):
    if st.legacy:
        return st, IgmpMessage(IgmpKind.LEGACY_REPORT, group_addr, own_addr, 0)
    q = quantize_sinr(current_sinr_db)
    # a fresh report ends any claim tied to an older confirmation
    return replace(st, last_reported_sinr_q=q, leader_token=None), IgmpMessage.report(group_addr, own_addr, q, 0)


class GsqReply(NamedTuple):
    state: StationLepState
    report: IgmpMessage | None = None
    legacy_delay_s: float | None = None


def _confirm(st: StationLepState, payload: int, group: int, own_addr: int) -> GsqReply:
    new = replace(st, is_leader=True, pending_random=None, leader_token=payload)
    return GsqReply(new, IgmpMessage.report(group, own_addr, payload, 0))


def station_on_gsq(msg: IgmpMessage, st: StationLepState, ap_addr: int, own_addr: int,
                   rng: random.Random) -> GsqReply:
    group = msg.group_addr
    if msg.kind is IgmpKind.LEGACY_QUERY or msg.source_addr != ap_addr or st.legacy:
        # router query: answer later with a plain report, leadership untouched
        max_resp_s = (msg.mrt_octet or 100) / 10.0
        return GsqReply(st, None, rng.uniform(0.0, max_resp_s))

    payload, d_bit = msg.payload7, msg.d_bit
    if d_bit == 0:
        if payload == st.pending_random or (st.is_leader and payload == st.leader_token):
            return _confirm(st, payload, group, own_addr)
        if st.pending_random is not None:
            return GsqReply(replace(st, is_leader=False, pending_random=None, leader_token=None))
    st = replace(st, pending_random=None)

    if st.last_reported_sinr_q is not None and payload == st.last_reported_sinr_q:
        if d_bit == 0:
            return _confirm(st, payload, group, own_addr)
        # 0 is excluded: a report with an all-zero MRT reads as legacy
        r = rng.randint(1, 127)
        new = replace(st, is_leader=False, pending_random=r, leader_token=None)
        return GsqReply(new, IgmpMessage.report(group, own_addr, r, 1))
    return GsqReply(replace(st, is_leader=False, leader_token=None))
