"""The simulated WLAN: one AP, multicast receivers and unicast stations
sharing a single 802.11a collision domain.

Contention runs on a slot grid.  Every station with a frame holds a backoff
counter; when the medium goes idle the counters resume after DIFS and the
smallest one fires.  All stations whose counter expires in the same slot
transmit together, and the whole exchange that follows (data frames, SIFS,
ACKs) is resolved at once as a *burst*.  Carrier sense is global: there are
no hidden terminals.
"""

from __future__ import annotations

import json
import math
from collections import deque
from typing import Callable

from . import channel as ch
from .config import MulticastMode, Role, ScenarioConfig, TrafficKind
from .engine import US_PER_S, EventQueue, SimulationError, rng_stream, seconds_to_us
from .frame_codec import (MIN_RATE, IGMP_WIRE_LEN, IgmpKind, SeqControl, SeqMode, decode_igmp, ip_to_int,
                          decode_seq_control, encode_igmp, encode_seq_control, rate_index,
                          rram_support_from_duration)
from .lep import (ApLepState, StationLepState, ap_confirmation_timeout, ap_on_report, ap_refresh_leader,
                  ap_resolve_reelection, station_on_gsq, station_periodic_report)
from .mac import (ACK_BYTES, MAC_DATA_OVERHEAD, AckKind, AckOutcome, AckReception, McastAckMode, TxAction,
                  ack_airtime_us, ack_rate, airtime_us, classify_ack_window, cw_on_collision,
                  draw_backoff, multicast_tx_policy, nav_duration_us)
from .metrics import Collector, FlowAudit, MetricsReport
from .mobility import Trajectory
from .rate_control import (ACK_COLLISION, FAILURE, FixedRateController, LbArfController,
                           RramController, TxOutcome, arf_init, arf_on_outcome,
                           receiver_ack_decision)

IP_HEADER_BYTES = 24  # with router alert
CONTROL_RATE = MIN_RATE
MR_QUEUE_LIMIT = 4
CBR_QUEUE_LIMIT = 64

# frame kinds
UDATA, MDATA, GSQ, MR = "udata", "mdata", "gsq", "mr"


def node_addr(idx: int) -> int:
    return (10 << 24) | (idx + 1)


class Packet:
    __slots__ = ("pid", "flow", "bits", "created", "received_by", "retries")

    def __init__(self, pid: int, flow: str, bits: int, created: int):
        self.pid = pid
        self.flow = flow
        self.bits = bits
        self.created = created
        self.received_by: set = set()
        self.retries = 0


class Frame:
    __slots__ = ("kind", "src", "length", "rate", "airtime", "acked", "packet", "body", "seq_word",
                 "duration")

    def __init__(self, kind, src, length, rate, acked, packet=None, body=None, seq_word=0, duration=0):
        self.kind = kind
        self.src = src
        self.length = length
        self.rate = rate
        self.airtime = airtime_us(length, rate)
        self.acked = acked
        self.packet = packet
        self.body = body
        self.seq_word = seq_word
        self.duration = duration


class Node:
    def __init__(self, idx: int, spec, seed: int):
        self.idx = idx
        self.name = spec.name
        self.role = spec.role
        self.spec = spec
        self.traj = Trajectory(spec.mobility, rng_stream(seed, idx, "mobility"))
        self.static = hasattr(spec.mobility, "x")
        self.rng_backoff = rng_stream(seed, idx, "backoff")
        self.rng_rx = rng_stream(seed, idx, "rx")
        self.rng_fade = rng_stream(seed, idx, "fading")
        self.rng_lep = rng_stream(seed, idx, "lep")
        self.cw = 0
        self.slots: int | None = None  # pending backoff, None when idle
        self.tx_time: int | None = None
        self.retries = 0
        self.ucast: Packet | None = None  # unicast station head packet
        self.arf = None
        self.mr_queue: deque = deque()
        self.lep = StationLepState(legacy=spec.legacy_igmp)
        self.snr_ewma: float | None = None
        self.snr_last: float | None = None
        self.last_useq = -1  # AP-side dedup, per source

    def position(self, t_us: int) -> tuple[float, float]:
        if self.static:
            return self.spec.mobility.x, self.spec.mobility.y
        return self.traj.position(t_us / US_PER_S)


class _Emission:
    __slots__ = ("src", "start", "end", "rate", "bits", "frame", "power")

    def __init__(self, src, start, end, rate, bits, frame):
        self.src = src
        self.start = start
        self.end = end
        self.rate = rate
        self.bits = bits
        self.frame = frame  # Frame for data, the acknowledged emission for ACKs
        self.power = {}  # receiver idx -> dBm


class _Positions(dict):
    """Node positions at one instant, computed on first use."""

    def __init__(self, nodes, t_us):
        super().__init__()
        self.nodes = nodes
        self.t = t_us

    def __missing__(self, idx):
        p = self[idx] = self.nodes[idx].position(self.t)
        return p


class Simulation:
    """One run of a scenario.  ``trace`` receives one dict per notable event."""

    def __init__(self, cfg: ScenarioConfig, trace: Callable[[dict], None] | None = None):
        cfg.validate()
        self.cfg = cfg
        self.chp = cfg.channel
        self.dcf = cfg.dcf
        self.ber = ch.ber_model(cfg.channel.ber_steepness)
        self.noise_mw = ch.dbm_to_mw(cfg.channel.noise_floor_dbm)
        self.trace_sink = trace
        self.q = EventQueue()
        self.end_us = seconds_to_us(cfg.duration_s)
        self.mode = cfg.multicast_mode

        self.nodes = [Node(i, s, cfg.seed) for i, s in enumerate(cfg.stations)]
        self.ap = next((n for n in self.nodes if n.role is Role.AP), None)
        self.receivers = [n for n in self.nodes if n.role is Role.MULTICAST_RECEIVER]
        for n in self.nodes:
            n.cw = self.dcf.cw_min
        self.collector = Collector(seconds_to_us(cfg.warmup_s), self.end_us,
                                   [n.name for n in self.receivers],
                                   [n.name for n in self.nodes if n.role is Role.UNICAST_STATION])
        self._next_pid = 0
        self._contend_token = 0
        self.busy_until = 0
        self.idle_origin = self.dcf.difs_us
        self._burst_open = False
        self._gains: dict = {}
        self._pl_cache: dict = {}

        # traffic
        self.mcast_source = None
        self.ucast_sources = {}
        for t in cfg.traffic:
            if t.kind is TrafficKind.SATURATED_UNICAST:
                self.ucast_sources[cfg.station_index(t.src)] = t
            else:
                self.mcast_source = t
        self.mcast_queue: deque = deque()
        self.audit = {}
        if self.mcast_source is not None:
            for r in self.receivers:
                self.audit[f"mcast->{r.name}"] = FlowAudit()
        for idx in self.ucast_sources:
            self.audit[f"{self.nodes[idx].name}->ap"] = FlowAudit()
        self.mcast_offered = 0
        self.mcast_dropped_total = 0

        # multicast control
        rate0 = MIN_RATE if cfg.rate_fixed is None else rate_index(cfg.rate_fixed)
        log = self._log_ctl if trace is not None else None
        if cfg.rate_fixed is not None or self.mode is MulticastMode.LEGACY:
            self.ctl = FixedRateController(rate0)
        elif self.mode is MulticastMode.LB_ARF:
            self.ctl = LbArfController(rate0, 0, seconds_to_us(cfg.arf_timer_s), log)
        else:
            self.ctl = RramController(rate0, log)
        self.lep_enabled = self.mode is not MulticastMode.LEGACY and self.ap is not None
        self.ap_lep = None
        if self.ap is not None:
            self.ap_lep = ApLepState(group_addr=ip_to_int(cfg.group_addr), ap_addr=node_addr(self.ap.idx),
                                     gsq_retry_limit=cfg.lep.gsq_retry_limit)
        self.gsq_pending = None
        self._lep_token = 0
        self.mcast_head: Packet | None = None
        self.mcast_retries = 0

    # -- tracing ------------------------------------------------------------

    def trace(self, ev: str, node: int = -1, **fields) -> None:
        if self.trace_sink is not None:
            fields.update(t=self.q.now, node=node, ev=ev)
            self.trace_sink(fields)

    def _log_ctl(self, rec: dict) -> None:
        self.trace("ctl", self.ap.idx if self.ap else -1, **rec)

    # -- setup --------------------------------------------------------------

    def _start(self) -> None:
        if self.ap is None:
            return
        if self.mcast_source is not None:
            if self.mcast_source.kind is TrafficKind.SATURATED_MULTICAST:
                self._new_mcast_packet(0)
            else:
                self.q.schedule(0, self.ap.idx, "cbr")
            self._wants_medium(self.ap, 0)
        for idx in sorted(self.ucast_sources):
            node = self.nodes[idx]
            node.arf = arf_init(MIN_RATE, 0, seconds_to_us(self.cfg.arf_timer_s))
            self._new_ucast_packet(node, 0)
            self._wants_medium(node, 0)
        if self.lep_enabled:
            period = seconds_to_us(self.cfg.lep.report_period_s)
            for r in self.receivers:
                self.q.schedule(r.rng_lep.randrange(period), r.idx, "report")

    def _new_mcast_packet(self, now: int) -> Packet:
        p = Packet(self._next_pid, "mcast", self.mcast_source.packet_bytes * 8, now)
        self._next_pid += 1
        self.mcast_offered += 1
        if self.mcast_head is None:
            self.mcast_head = p
            self.mcast_retries = 0
        else:
            self.mcast_queue.append(p)
        return p

    def _new_ucast_packet(self, node: Node, now: int) -> None:
        t = self.ucast_sources[node.idx]
        node.ucast = Packet(self._next_pid, node.name, t.packet_bytes * 8, now)
        self._next_pid += 1
        node.retries = 0
        self.audit[f"{node.name}->ap"].offered += 1

    # -- contention ---------------------------------------------------------

    def _has_frame(self, n: Node) -> bool:
        if n is self.ap:
            return self.gsq_pending is not None or self.mcast_head is not None
        if n.role is Role.UNICAST_STATION:
            return n.ucast is not None
        return bool(n.mr_queue)

    def _wants_medium(self, n: Node, now: int) -> None:
        """``n`` has a frame; make sure it holds a backoff counter."""
        if n.slots is None and n.tx_time is None:
            n.slots = draw_backoff(n.cw, n.rng_backoff)
        if self._burst_open or n.tx_time is not None:
            return
        origin = self.idle_origin
        if now > origin:
            origin += -(-(now - origin) // self.dcf.slot_us) * self.dcf.slot_us
        n.tx_time = origin + n.slots * self.dcf.slot_us
        n.slots = None
        self._schedule_contend()

    def _schedule_contend(self) -> None:
        times = [n.tx_time for n in self.nodes if n.tx_time is not None]
        if not times:
            return
        self._contend_token += 1
        self.q.schedule(min(times), -1, "contend", self._contend_token)

    def _on_contend(self, now: int) -> None:
        txs = []
        for n in self.nodes:
            if n.tx_time is None:
                continue
            if n.tx_time == now:
                txs.append(n)
                n.tx_time = None
            else:
                n.slots = (n.tx_time - now) // self.dcf.slot_us
                n.tx_time = None
        if not txs:
            raise SimulationError(f"contention event at {now} with no transmitter")
        self._burst(now, txs)

    # -- frames -------------------------------------------------------------

    def _control_frame(self, kind: str, src: Node, msg, acked: bool) -> Frame:
        length = MAC_DATA_OVERHEAD + IP_HEADER_BYTES + IGMP_WIRE_LEN
        return Frame(kind, src.idx, length, CONTROL_RATE, acked, body=encode_igmp(msg),
                     duration=nav_duration_us(CONTROL_RATE, self.dcf) if acked else 0)

    def _build_frame(self, n: Node) -> Frame:
        if n is self.ap:
            if self.gsq_pending is not None:
                msg, self.gsq_pending = self.gsq_pending, None
                return self._control_frame(GSQ, n, msg, False)
            p = self.mcast_head
            rate, tpr = self.ctl.rate, self.ctl.tpr
            acked = self._leader_acked()
            word = encode_seq_control(SeqControl(SeqMode.MULTICAST9, 0, p.pid % 512, tpr))
            length = MAC_DATA_OVERHEAD + p.bits // 8
            return Frame(MDATA, n.idx, length, rate, acked, packet=p, seq_word=word,
                         duration=nav_duration_us(rate, self.dcf) if acked else 0)
        if n.role is Role.UNICAST_STATION:
            p = n.ucast
            length = MAC_DATA_OVERHEAD + p.bits // 8
            return Frame(UDATA, n.idx, length, n.arf.rate, True, packet=p,
                         duration=nav_duration_us(n.arf.rate, self.dcf))
        return self._control_frame(MR, n, n.mr_queue[0], True)

    def _leader_acked(self) -> bool:
        return self.lep_enabled and self.ap_lep.current_leader is not None

    # -- radio --------------------------------------------------------------

    def _gain(self, a: int, b: int) -> float:
        # block fading, reciprocal within one burst
        key = (a, b) if a < b else (b, a)
        g = self._gains.get(key)
        if g is None:
            g = ch.ricean_gain(self.chp.ricean_k, self.nodes[key[1]].rng_fade)
            self._gains[key] = g
        return g

    def _path_loss(self, a: Node, b: Node, pos: dict) -> float:
        key = (a.idx, b.idx) if a.idx < b.idx else (b.idx, a.idx)
        static = a.static and b.static
        if static:
            pl = self._pl_cache.get(key)
            if pl is not None:
                return pl
        (xa, ya), (xb, yb) = pos[a.idx], pos[b.idx]
        d = max(math.hypot(xa - xb, ya - yb), 1e-3)
        pl = ch.path_loss_db(d, self.chp)
        if static:
            self._pl_cache[key] = pl
        return pl

    def _rx_dbm(self, e: _Emission, rx: Node, pos: dict) -> float:
        p = e.power.get(rx.idx)
        if p is None:
            g = max(self._gain(e.src, rx.idx), 1e-12)
            p = self.chp.tx_power_dbm - self._path_loss(self.nodes[e.src], rx, pos) + 10.0 * math.log10(g)
            e.power[rx.idx] = p
        return p

    def _receive(self, e: _Emission, rx: Node, emissions: list, pos: dict):
        """Returns ``(decoded, signal_dbm, min_sinr_db)`` for ``e`` at ``rx``."""
        sig = self._rx_dbm(e, rx, pos)
        others = [o for o in emissions if o is not e and o.start < e.end and o.end > e.start]
        for o in others:
            if o.src == rx.idx:
                return False, sig, -math.inf  # half duplex
        bits, rate = e.bits, e.rate
        if not others:
            s = sig - self.chp.noise_floor_dbm
            p_ok = math.exp(self.ber.log_success(rate, s, bits))
            return rx.rng_rx.random() < p_ok, sig, s
        cuts = sorted({e.start, e.end} | {t for o in others for t in (o.start, o.end) if e.start < t < e.end})
        segs = []
        sig_mw = ch.dbm_to_mw(sig)
        for a, b in zip(cuts, cuts[1:]):
            interf = sum(ch.dbm_to_mw(self._rx_dbm(o, rx, pos)) for o in others if o.start < b and o.end > a)
            segs.append((a, b, 10.0 * math.log10(sig_mw / (self.noise_mw + interf))))
        trace = ch.SinrTrace(tuple(segs))
        p_ok = self.ber.success_probability(trace, rate, bits)
        return rx.rng_rx.random() < p_ok, sig, trace.min_sinr

    # -- burst --------------------------------------------------------------

    def _burst(self, now: int, txs: list) -> None:
        self._burst_open = True
        self._gains = {}
        pos = _Positions(self.nodes, now)
        frames = [(n, self._build_frame(n)) for n in txs]
        data = [_Emission(n.idx, now, now + f.airtime, f.rate, f.length * 8, f) for n, f in frames]
        for n, f in frames:
            if self.trace_sink is not None:
                tpr = decode_seq_control(f.seq_word, SeqMode.MULTICAST9).tpr if f.kind == MDATA else None
                self.trace("tx", n.idx, kind=f.kind, rate=f.rate, cw=n.cw, len=f.length, tpr=tpr)
            if f.kind == MDATA:
                self.collector.multicast_attempt(now, f.rate, f.airtime)

        results = []  # per data emission: list of (rx node, decoded, sinr)
        for e in data:
            f = e.frame
            if f.kind in (MDATA, GSQ):
                targets = self.receivers
            else:
                targets = [self.ap]
            rx_list = []
            for r in targets:
                ok, sig, sinr = self._receive(e, r, data, pos)
                rx_list.append((r, ok, sig, sinr))
            results.append(rx_list)

        # ACK responders
        acks = []
        for e, rx_list in zip(data, results):
            f = e.frame
            if not f.acked:
                continue
            start = e.end + self.dcf.sifs_us
            ack_len = ack_airtime_us(f.rate)
            ack_bits = ACK_BYTES * 8
            if f.kind == MDATA:
                tpr = decode_seq_control(f.seq_word, SeqMode.MULTICAST9).tpr
                for r, ok, _, _ in rx_list:
                    if not ok or not rram_support_from_duration(f.duration):
                        continue
                    own = r.snr_ewma if r.snr_ewma is not None else -math.inf
                    if receiver_ack_decision(tpr, f.rate, own, r.lep.is_leader):
                        acks.append(_Emission(r.idx, start, start + ack_len, ack_rate(f.rate), ack_bits, e))
            else:
                if rx_list[0][1]:
                    acks.append(_Emission(self.ap.idx, start, start + ack_len, ack_rate(f.rate), ack_bits, e))

        # a station sending an ACK cannot still be receiving a longer data frame
        for e, rx_list in zip(data, results):
            for i, (r, ok, sig, sinr) in enumerate(rx_list):
                if ok and any(a.src == r.idx and a.start < e.end for a in acks):
                    rx_list[i] = (r, False, sig, sinr)

        everything = data + acks
        ack_outcomes = {}
        for e in data:
            f = e.frame
            if not f.acked:
                continue
            mine = [a for a in acks if a.frame is e]
            tx_node = self.nodes[e.src]
            if f.kind == MDATA and len(mine) > 1:
                # identical ACKs fired in the same slot: nothing decodable, only energy
                recs = [AckReception(False, self._rx_dbm(a, tx_node, pos)) for a in mine]
            else:
                recs = [AckReception(*self._receive(a, tx_node, everything, pos)) for a in mine]
            ack_outcomes[e] = classify_ack_window(recs, self.chp.cca_threshold_dbm)

        busy_end = now
        for e in data:
            end = e.end + (e.frame.duration if e.frame.acked else 0)
            busy_end = max(busy_end, end)
        for a in acks:
            busy_end = max(busy_end, a.end)
        self.busy_until = busy_end
        self.q.schedule(busy_end, -1, "burst_end", (txs, data, results, ack_outcomes))

    def _on_burst_end(self, now: int, payload) -> None:
        txs, data, results, ack_outcomes = payload
        # receiver-side effects first: SNR tracking, deliveries, LEP
        for e, rx_list in zip(data, results):
            f = e.frame
            if f.kind == MDATA or f.kind == GSQ:
                alpha = self.cfg.lep.sinr_ewma_alpha
                for r, ok, sig, _ in rx_list:
                    snr = sig - self.chp.noise_floor_dbm
                    r.snr_last = snr
                    r.snr_ewma = snr if r.snr_ewma is None else (1 - alpha) * r.snr_ewma + alpha * snr
                    if ok and f.kind == MDATA:
                        f.packet.received_by.add(r.name)
                    elif ok:
                        self._station_gsq(r, f, now)
            else:
                r, ok, _, _ = rx_list[0]
                if ok:
                    src = self.nodes[f.src]
                    if f.kind == UDATA and f.packet.pid != src.last_useq:
                        src.last_useq = f.packet.pid
                        f.packet.received_by.add(self.ap.name)
                        self.collector.unicast_delivered(now, src.name, f.packet.bits)
                    elif f.kind == MR and f.packet is None:
                        self._ap_report(src, f, now)

        # transmitter-side outcomes
        for e in data:
            n = self.nodes[e.src]
            f = e.frame
            if f.kind == MDATA:
                self._mcast_outcome(n, f, ack_outcomes.get(e), now)
            elif f.kind == GSQ:
                self._gsq_sent(f, now)
            elif f.kind == UDATA:
                self._ucast_outcome(n, f, ack_outcomes[e], now)
            else:
                self._mr_outcome(n, ack_outcomes[e], now)

        self._burst_open = False
        self.idle_origin = now + self.dcf.difs_us
        for n in self.nodes:
            if self._has_frame(n):
                if n.slots is None:
                    n.slots = draw_backoff(n.cw, n.rng_backoff)
                n.tx_time = self.idle_origin + n.slots * self.dcf.slot_us
                n.slots = None
            else:
                n.slots = None
        self._schedule_contend()

    # -- outcomes -----------------------------------------------------------

    def _finish_mcast(self, now: int, dropped: bool) -> None:
        p = self.mcast_head
        self.collector.multicast_packet_done(now, p.bits, p.received_by, dropped)
        for r in self.receivers:
            a = self.audit[f"mcast->{r.name}"]
            if r.name in p.received_by:
                a.delivered += 1
            else:
                a.dropped += 1
        self.mcast_dropped_total += dropped
        self.trace("mdone", self.ap.idx, pid=p.pid, got=len(p.received_by), drop=dropped)
        self.mcast_head = self.mcast_queue.popleft() if self.mcast_queue else None
        self.mcast_retries = 0
        if self.mcast_head is None and self.mcast_source.kind is TrafficKind.SATURATED_MULTICAST:
            self._new_mcast_packet(now)

    def _mcast_outcome(self, ap: Node, f: Frame, ack: AckOutcome | None, now: int) -> None:
        if not f.acked:
            self.trace("mres", ap.idx, res="sent")
            ap.cw = self.dcf.cw_min
            ap.slots = None
            self._finish_mcast(now, False)
            return
        probing = getattr(self.ctl, "probing", False)
        if ack.kind is AckKind.OK:
            self.ctl.on_outcome(TxOutcome.success(ack.sinr_db), now)
        elif ack.kind is AckKind.COLLISION and probing:
            self.ctl.on_outcome(ACK_COLLISION, now)
        else:
            self.ctl.on_outcome(FAILURE, now)
            if ack.kind is AckKind.COLLISION:
                # two stations think they lead: retransmit and re-announce the leader
                ack = AckOutcome(AckKind.SILENCE)
                if self.gsq_pending is None:
                    old = self.ap_lep.current_leader
                    self.ap_lep, gsq = ap_refresh_leader(self.ap_lep)
                    self._after_lep(old, gsq, now)
        action = multicast_tx_policy(McastAckMode.LEADER_ACKED, ack)
        self.trace("mres", ap.idx, res=ack.kind.value, rate=self.ctl.rate, tpr=self.ctl.tpr)
        ap.slots = None
        if action is TxAction.DONE:
            ap.cw = self.dcf.cw_min
            self._finish_mcast(now, False)
            return
        self.mcast_retries += 1
        if self.mcast_retries > self.dcf.retry_limit:
            ap.cw = self.dcf.cw_min
            self._finish_mcast(now, True)
        else:
            ap.cw = cw_on_collision(ap.cw, self.dcf)

    def _ucast_outcome(self, n: Node, f: Frame, ack: AckOutcome, now: int) -> None:
        ok = ack.kind is AckKind.OK
        n.arf = arf_on_outcome(n.arf, ok, now, seconds_to_us(self.cfg.arf_timer_s))
        n.slots = None
        audit = self.audit[f"{n.name}->ap"]
        if ok:
            n.cw = self.dcf.cw_min
            audit.delivered += 1
            self._new_ucast_packet(n, now)
            return
        n.retries += 1
        if n.retries > self.dcf.retry_limit:
            n.cw = self.dcf.cw_min
            if self.ap.name in f.packet.received_by:
                audit.delivered += 1  # got through, only the ACKs were lost
            else:
                audit.dropped += 1
            self._new_ucast_packet(n, now)
        else:
            n.cw = cw_on_collision(n.cw, self.dcf)

    def _mr_outcome(self, n: Node, ack: AckOutcome, now: int) -> None:
        n.slots = None
        if ack.kind is AckKind.OK:
            n.cw = self.dcf.cw_min
            n.retries = 0
            n.mr_queue.popleft()
            return
        n.retries += 1
        if n.retries > self.dcf.retry_limit:
            n.cw = self.dcf.cw_min
            n.retries = 0
            n.mr_queue.popleft()
        else:
            n.cw = cw_on_collision(n.cw, self.dcf)

    # -- LEP glue -----------------------------------------------------------

    def _queue_report(self, r: Node, msg, now: int) -> None:
        if len(r.mr_queue) >= MR_QUEUE_LIMIT:
            r.mr_queue.popleft()
        r.mr_queue.append(msg)
        self._wants_medium(r, now)

    def _on_report_timer(self, r: Node, now: int) -> None:
        self.q.schedule(now + seconds_to_us(self.cfg.lep.report_period_s), r.idx, "report")
        if r.snr_ewma is None:
            return
        sinr = r.snr_last if self.cfg.lep.report_sinr == "last" else r.snr_ewma
        r.lep, msg = station_periodic_report(r.lep, sinr, self.cfg.group_addr, node_addr(r.idx))
        self.trace("mr", r.idx, q=msg.payload7, d=msg.d_bit, periodic=True)
        self._queue_report(r, msg, now)

    def _station_gsq(self, r: Node, f: Frame, now: int) -> None:
        msg = decode_igmp(f.body, node_addr(self.ap.idx))
        was_leader = r.lep.is_leader
        reply = station_on_gsq(msg, r.lep, node_addr(self.ap.idx), node_addr(r.idx), r.rng_lep)
        r.lep = reply.state
        if was_leader != r.lep.is_leader:
            self.trace("leader", r.idx, is_leader=r.lep.is_leader)
        if reply.report is not None:
            self.trace("mr", r.idx, q=reply.report.payload7, d=reply.report.d_bit, periodic=False)
            self._queue_report(r, reply.report, now)
        elif reply.legacy_delay_s is not None:
            self.q.schedule(now + seconds_to_us(reply.legacy_delay_s), r.idx, "report")

    def _ap_report(self, src: Node, f: Frame, now: int) -> None:
        msg = decode_igmp(f.body, node_addr(self.ap.idx))
        if msg.kind is IgmpKind.LEGACY_REPORT:
            return
        old_leader = self.ap_lep.current_leader
        self.ap_lep, gsq = ap_on_report(msg, self.ap_lep, src.idx, now)
        self._after_lep(old_leader, gsq, now)

    def _after_lep(self, old_leader, gsq, now: int) -> None:
        st = self.ap_lep
        if st.current_leader != old_leader and st.current_leader is not None:
            sinr_q = st.leader_sinr_q()
            self.trace("commit", self.ap.idx, leader=st.current_leader, sinr_q=sinr_q)
            self.collector.leader_changed(now)
            self.ctl.on_leader_change(float(sinr_q), now)
        if gsq is not None:
            self.gsq_pending = gsq
            self._lep_token += 1  # a fresh query supersedes any running timer
            self.trace("gsq_q", self.ap.idx, q=gsq.payload7, d=gsq.d_bit)
            self._wants_medium(self.ap, now)

    def _gsq_sent(self, f: Frame, now: int) -> None:
        msg = decode_igmp(f.body, node_addr(self.ap.idx))
        self._lep_token += 1
        if msg.d_bit:
            delay, kind = seconds_to_us(self.cfg.lep.reelection_window_s), "reelect"
        else:
            delay, kind = seconds_to_us(self.cfg.lep.confirm_timeout_s), "confirm_timeout"
        self.q.schedule(now + delay, self.ap.idx, kind, self._lep_token)
        self.ap.slots = None

    def _on_lep_timer(self, kind: str, token: int, now: int) -> None:
        if token != self._lep_token:
            return
        old = self.ap_lep.current_leader
        if kind == "reelect":
            self.ap_lep, gsq = ap_resolve_reelection(self.ap_lep)
        else:
            self.ap_lep, gsq = ap_confirmation_timeout(self.ap_lep)
        self._after_lep(old, gsq, now)

    # -- main loop ----------------------------------------------------------

    def _on_cbr(self, now: int) -> None:
        t = self.mcast_source
        self.q.schedule(now + seconds_to_us(t.interval_s), self.ap.idx, "cbr")
        if len(self.mcast_queue) >= CBR_QUEUE_LIMIT:
            self.mcast_offered += 1
            for r in self.receivers:
                self.audit[f"mcast->{r.name}"].dropped += 1
            return
        self._new_mcast_packet(now)
        self._wants_medium(self.ap, now)

    def run(self) -> MetricsReport:
        self._start()
        q = self.q
        while True:
            t = q.peek_time()
            if t is None or t >= self.end_us:
                break
            ev = q.advance()
            kind = ev.kind
            if kind == "contend":
                if ev.payload == self._contend_token:
                    self._on_contend(ev.time)
            elif kind == "burst_end":
                self._on_burst_end(ev.time, ev.payload)
            elif kind == "report":
                self._on_report_timer(self.nodes[ev.target], ev.time)
            elif kind in ("reelect", "confirm_timeout"):
                self._on_lep_timer(kind, ev.payload, ev.time)
            elif kind == "cbr":
                self._on_cbr(ev.time)
            else:
                raise SimulationError(f"unknown event kind {kind!r}")
        q.now = max(q.now, self.end_us)
        return self._report()

    def _report(self) -> MetricsReport:
        if self.mcast_source is not None and self.ap is not None:
            in_flight = (self.mcast_head is not None) + len(self.mcast_queue)
            for r in self.receivers:
                a = self.audit[f"mcast->{r.name}"]
                a.offered = self.mcast_offered
                a.in_flight = in_flight
        for idx in self.ucast_sources:
            n = self.nodes[idx]
            self.audit[f"{n.name}->ap"].in_flight = int(n.ucast is not None)
        rep = self.collector.report(self.audit)
        self.trace("end", metrics=rep.scalar_row())
        return rep


def run(cfg: ScenarioConfig, trace: Callable[[dict], None] | None = None) -> MetricsReport:
    return Simulation(cfg, trace).run()


def json_trace_writer(fh) -> Callable[[dict], None]:
    """Sink writing one JSON object per line with sorted keys."""
    def write(rec: dict) -> None:
        fh.write(json.dumps(rec, sort_keys=True, default=str))
        fh.write("\n")
    return write
