"""Measurement-window bookkeeping and the per-run report."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .frame_codec import RATES_MBPS


@dataclass
class FlowAudit:
    offered: int = 0
    delivered: int = 0
    dropped: int = 0
    in_flight: int = 0

    @property
    def balanced(self) -> bool:
        return self.offered == self.delivered + self.dropped + self.in_flight


@dataclass
class MetricsReport:
    window_s: float
    no_measurement_window: bool = False
    per_station_throughput: dict = field(default_factory=dict)  # name -> Mbps
    receiver_loss_rate: dict = field(default_factory=dict)  # name -> fraction
    worst_receiver_loss_rate: float = 0.0
    best_receiver_throughput: float = 0.0
    worst_receiver_throughput: float = 0.0
    avg_multicast_throughput: float = 0.0
    avg_unicast_throughput: float = 0.0
    avg_multicast_phy_rate: float = 0.0
    throughput_ratio: float = 0.0
    multicast_packets: int = 0
    multicast_drops: int = 0
    multicast_tx_attempts: int = 0
    leader_changes: int = 0
    audit: dict = field(default_factory=dict)  # flow -> FlowAudit

    @property
    def conserved(self) -> bool:
        return all(a.balanced for a in self.audit.values())

    def scalar_row(self) -> dict:
        return {
            "worst_loss": self.worst_receiver_loss_rate,
            "best_thr_mbps": self.best_receiver_throughput,
            "worst_thr_mbps": self.worst_receiver_throughput,
            "avg_mcast_thr_mbps": self.avg_multicast_throughput,
            "avg_ucast_thr_mbps": self.avg_unicast_throughput,
            "avg_phy_rate_mbps": self.avg_multicast_phy_rate,
            "thr_ratio": self.throughput_ratio,
            "mcast_packets": self.multicast_packets,
            "mcast_drops": self.multicast_drops,
            "leader_changes": self.leader_changes,
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conserved"] = self.conserved
        return d


class Collector:
    """Counts what happens inside ``[start_us, end_us)``."""

    def __init__(self, start_us: int, end_us: int, receivers: list[str], unicast: list[str]):
        self.start = start_us
        self.end = end_us
        self.receivers = receivers
        self.unicast = unicast
        self.mc_packets = 0
        self.mc_drops = 0
        self.mc_bits = 0
        self.mc_got = {r: 0 for r in receivers}
        self.mc_got_bits = {r: 0 for r in receivers}
        self.uc_bits = {u: 0 for u in unicast}
        self.rate_airtime = 0.0
        self.airtime = 0
        self.mc_attempts = 0
        self.leader_changes = 0

    def in_window(self, t: int) -> bool:
        return self.start <= t < self.end

    def multicast_attempt(self, t: int, rate: int, airtime: int) -> None:
        if self.in_window(t):
            self.mc_attempts += 1
            self.rate_airtime += RATES_MBPS[rate] * airtime
            self.airtime += airtime

    def multicast_packet_done(self, t: int, bits: int, received_by, dropped: bool) -> None:
        if not self.in_window(t):
            return
        self.mc_packets += 1
        self.mc_drops += dropped
        for r in received_by:
            self.mc_got[r] += 1
            self.mc_got_bits[r] += bits

    def unicast_delivered(self, t: int, src: str, bits: int) -> None:
        if self.in_window(t):
            self.uc_bits[src] += bits

    def leader_changed(self, t: int) -> None:
        if self.in_window(t):
            self.leader_changes += 1

    def report(self, audit: dict) -> MetricsReport:
        window_s = max(0, self.end - self.start) / 1e6
        if window_s <= 0:
            return MetricsReport(0.0, no_measurement_window=True, audit=audit)
        thr = {}
        loss = {}
        for r in self.receivers:
            thr[r] = self.mc_got_bits[r] / window_s / 1e6
            loss[r] = 1.0 - self.mc_got[r] / self.mc_packets if self.mc_packets else 0.0
        for u in self.unicast:
            thr[u] = self.uc_bits[u] / window_s / 1e6
        mc = [thr[r] for r in self.receivers]
        uc = [thr[u] for u in self.unicast]
        avg_mc = sum(mc) / len(mc) if mc else 0.0
        avg_uc = sum(uc) / len(uc) if uc else 0.0
        return MetricsReport(
            window_s=window_s,
            per_station_throughput=thr,
            receiver_loss_rate=loss,
            worst_receiver_loss_rate=max(loss.values()) if loss else 0.0,
            best_receiver_throughput=max(mc) if mc else 0.0,
            worst_receiver_throughput=min(mc) if mc else 0.0,
            avg_multicast_throughput=avg_mc,
            avg_unicast_throughput=avg_uc,
            avg_multicast_phy_rate=self.rate_airtime / self.airtime if self.airtime else 0.0,
            throughput_ratio=avg_uc / avg_mc if avg_mc > 0 and uc else 0.0,
            multicast_packets=self.mc_packets,
            multicast_drops=self.mc_drops,
            multicast_tx_attempts=self.mc_attempts,
            leader_changes=self.leader_changes,
            audit=audit,
        )
