"""Reference models written straight from the protocol prose, independent of the package code.

Shared by the unit tests and the acceptance suite.
"""

from __future__ import annotations

import itertools
import random
from collections import deque

from mcastsim.channel import TARGET_SINR_DB
from mcastsim.frame_codec import IgmpMessage
from mcastsim.lep import (ApLepState, AwaitingConfirm, AwaitingReelection, StationLepState,
                          ap_confirmation_timeout, ap_on_report, ap_resolve_reelection,
                          station_on_gsq, station_periodic_report)

# -- ARF ---------------------------------------------------------------------------


def arf_reference(start_rate, outcomes, times, timer_us):
    """Replay ARF from its description and return the rate after each outcome.

    Up one step after ten ACKs in a row or once the timer has run out,
    down one step after two failures in a row.  Any rate change restarts
    both counters and the timer.  Two failures win over the timer.
    """
    rate = start_rate
    since_change = []
    changed_at = 0
    out = []
    for ok, t in zip(outcomes, times):
        since_change.append(ok)
        if len(since_change) >= 2 and not since_change[-1] and not since_change[-2]:
            rate = max(rate - 1, 0)
            since_change, changed_at = [], t
        elif (len(since_change) >= 10 and all(since_change[-10:])) or t - changed_at >= timer_us:
            rate = min(rate + 1, 7)
            since_change, changed_at = [], t
        out.append(rate)
    return out


def all_sequences(max_len):
    for n in range(max_len + 1):
        yield from itertools.product((True, False), repeat=n)


# -- RRAM --------------------------------------------------------------------------

SUCCESS_NEXT = {"S1": "S2", "S2": "S3", "S3": "S4", "S4": "S5", "S5": "S6", "S6": "S7"}


def rram_reference(node, rate, tpr, kind, ack_sinr=None):
    """Transition table of the rate adaptation graph, as ``(node, rate, tpr)``.

    ``kind`` is ``"success"``, ``"failure"`` or ``"collision"``.  Returns
    ``None`` for inputs the graph does not define.
    """
    probe = node in ("S8", "S9")
    if kind == "failure":
        if probe:
            return "F1", rate, rate
        if node == "S10" or (node == "F1" and rate > 0):
            return "Base", rate - 1 if rate else 0, rate - 1 if rate else 0
        if node == "F1":
            return "F1", 0, 0
        return "F1", rate, rate
    if kind == "collision":
        return ("S7", rate, rate) if probe else None
    if node in ("Init", "Base", "F1", "S10"):
        return "S1", rate, rate
    if node == "S1" and rate == 7:
        return "S1", rate, rate
    if node in SUCCESS_NEXT:
        return SUCCESS_NEXT[node], rate, rate
    if node == "S7":
        if rate < 7 and ack_sinr > TARGET_SINR_DB[rate + 1]:
            return "S8", rate, rate + 1
        return "S7", rate, rate
    if probe:
        return "S10", tpr, tpr
    return None


# -- LEP ---------------------------------------------------------------------------

GROUP = 0xEF010101
AP_ADDR = 0x0A000001


class LepHarness:
    """Lossless, instantaneous delivery between one AP and ``n`` stations.

    Messages are handled in FIFO order; AP timers fire only once nothing
    is left in flight.
    """

    def __init__(self, sinrs, seed=0, order=None):
        self.sinrs = list(sinrs)
        self.macs = list(range(1, len(sinrs) + 1))
        self.ap = ApLepState(GROUP, AP_ADDR)
        self.sta = {m: StationLepState() for m in self.macs}
        self.rngs = {m: random.Random(seed * 1000 + m) for m in self.macs}
        self.order = list(order) if order is not None else list(self.macs)
        self.inbox = deque()
        self.reelection_rounds = 0
        self.repeated_rounds = 0  # rounds whose largest random was drawn twice
        self.leader_counts = []  # stations claiming leadership after every step

    def addr(self, mac):
        return 0x0A000000 + 1 + mac

    def _step_check(self):
        self.leader_counts.append(sum(s.is_leader for s in self.sta.values()))

    def _ap_gets(self, mac, msg):
        self.ap, gsq = ap_on_report(msg, self.ap, mac)
        if gsq is not None:
            self._queue_gsq(gsq)

    def _queue_gsq(self, gsq):
        # the AP holds one outgoing query; a newer one replaces an unsent one
        self.inbox = deque(x for x in self.inbox if x[0] != "gsq")
        self.inbox.append(("gsq", None, gsq))

    def _broadcast(self, gsq: IgmpMessage):
        for m in self.macs:
            reply = station_on_gsq(gsq, self.sta[m], AP_ADDR, self.addr(m), self.rngs[m])
            self.sta[m] = reply.state
            self._step_check()
            if reply.report is not None:
                self.inbox.append(("report", m, reply.report))

    def run(self, max_steps=1000):
        for m in self.order:
            self.sta[m], msg = station_periodic_report(self.sta[m], self.sinrs[m - 1], GROUP, self.addr(m))
            self.inbox.append(("report", m, msg))
        for _ in range(max_steps):
            if self.inbox:
                what, mac, msg = self.inbox.popleft()
                if what == "report":
                    self._ap_gets(mac, msg)
                else:
                    self._broadcast(msg)
                self._step_check()
                continue
            phase = self.ap.phase
            if isinstance(phase, AwaitingReelection):
                self.reelection_rounds += 1
                votes = [r for _, r in phase.pending_randoms]
                if votes and votes.count(max(votes)) > 1:
                    self.repeated_rounds += 1
                self.ap, gsq = ap_resolve_reelection(self.ap)
            elif isinstance(phase, AwaitingConfirm):
                self.ap, gsq = ap_confirmation_timeout(self.ap)
            else:
                return self
            if gsq is not None:
                self._queue_gsq(gsq)
        raise AssertionError("election did not settle")

    def claimed_leaders(self):
        return [m for m in self.macs if self.sta[m].is_leader]
