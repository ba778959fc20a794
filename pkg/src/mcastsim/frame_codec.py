"""Wire formats for leader-based 802.11 multicast.

IGMP carried in data frames (IP source address + 8-byte IGMPv2 body)::

    | Offset | Size | Field                                   |
    |--------|------|-----------------------------------------|
    | 0      | 4    | source IP (pseudo header, big endian)   |
    | 4      | 1    | type: 0x16 report, 0x11 query           |
    | 5      | 1    | MRT: D bit (MSB) | SINR / random (7 bit) |
    | 6      | 2    | internet checksum over the IGMP body    |
    | 8      | 4    | group address                           |

802.11 Sequence Control word (16 bit)::

    bits 15..4  sequence subfield (12 bit)
    bits  3..0  fragment number

In multicast frames the 12-bit sequence subfield is split into
``tpr(3) | seq(9)``, TPR in the three most significant bits.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

RATES_MBPS = (6, 9, 12, 18, 24, 36, 48, 54)
MIN_RATE = 0
MAX_RATE = len(RATES_MBPS) - 1

IGMP_REPORT = 0x16
IGMP_QUERY = 0x11
IGMP_WIRE_LEN = 12


class CodecError(ValueError):
    """Raised when a field does not fit its wire width or a buffer is malformed."""


def rate_mbps(idx: int) -> int:
    if not MIN_RATE <= idx <= MAX_RATE:
        raise CodecError(f"rate index {idx} outside 0..{MAX_RATE}")
    return RATES_MBPS[idx]


def rate_index(mbps: float) -> int:
    try:
        return RATES_MBPS.index(int(mbps))
    except ValueError:
        raise CodecError(f"{mbps} Mbps is not an 802.11a rate") from None


# -- MRT octet ---------------------------------------------------------------

def pack_mrt(sinr_q: int, d_bit: int) -> int:
    if not 0 <= sinr_q <= 127:
        raise CodecError(f"7-bit payload out of range: {sinr_q}")
    if d_bit not in (0, 1):
        raise CodecError(f"D bit must be 0 or 1, got {d_bit}")
    return (d_bit << 7) | sinr_q


def unpack_mrt(octet: int) -> tuple[int, int]:
    if not 0 <= octet <= 0xFF:
        raise CodecError(f"not an octet: {octet}")
    return octet & 0x7F, octet >> 7


def quantize_sinr(sinr_db: float) -> int:
    """Round to the nearest whole dB and clamp into the 7-bit field."""
    q = int(round(sinr_db))
    return min(127, max(0, q))


# -- IGMP --------------------------------------------------------------------

class IgmpKind(enum.Enum):
    MEMBERSHIP_REPORT = "MR"
    GROUP_SPECIFIC_QUERY = "GSQ"
    LEGACY_REPORT = "legacy-MR"
    LEGACY_QUERY = "legacy-GSQ"

    @property
    def is_report(self) -> bool:
        return self in (IgmpKind.MEMBERSHIP_REPORT, IgmpKind.LEGACY_REPORT)


def ip_to_int(addr) -> int:
    if isinstance(addr, int):
        if not 0 <= addr <= 0xFFFFFFFF:
            raise CodecError(f"address out of 32-bit range: {addr}")
        return addr
    parts = str(addr).split(".")
    if len(parts) != 4:
        raise CodecError(f"bad dotted quad: {addr!r}")
    value = 0
    for p in parts:
        octet = int(p)
        if not 0 <= octet <= 255:
            raise CodecError(f"bad dotted quad: {addr!r}")
        value = (value << 8) | octet
    return value


def ip_str(value: int) -> str:
    return ".".join(str((value >> s) & 0xFF) for s in (24, 16, 8, 0))


def internet_checksum(data: bytes) -> int:
    if len(data) % 2:
        data += b"\x00"
    total = sum(struct.unpack(f"!{len(data) // 2}H", data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


@dataclass(frozen=True)
class IgmpMessage:
    kind: IgmpKind
    group_addr: int
    source_addr: int
    mrt_octet: int = 0

    def __post_init__(self):
        object.__setattr__(self, "group_addr", ip_to_int(self.group_addr))
        object.__setattr__(self, "source_addr", ip_to_int(self.source_addr))
        if not 0 <= self.mrt_octet <= 0xFF:
            raise CodecError(f"MRT must be an octet, got {self.mrt_octet}")
        if self.kind is IgmpKind.LEGACY_REPORT and self.mrt_octet != 0:
            raise CodecError("legacy reports carry MRT = 0")

    @property
    def payload7(self) -> int:
        return self.mrt_octet & 0x7F

    @property
    def d_bit(self) -> int:
        return self.mrt_octet >> 7

    @property
    def type_octet(self) -> int:
        return IGMP_REPORT if self.kind.is_report else IGMP_QUERY

    def _body(self, checksum: int) -> bytes:
        return struct.pack("!BBHI", self.type_octet, self.mrt_octet, checksum, self.group_addr)

    @property
    def checksum(self) -> int:
        return internet_checksum(self._body(0))

    @classmethod
    def report(cls, group, source, sinr_q: int, d_bit: int = 0) -> "IgmpMessage":
        return cls(IgmpKind.MEMBERSHIP_REPORT, group, source, pack_mrt(sinr_q, d_bit))

    @classmethod
    def query(cls, group, source, sinr_q: int, d_bit: int = 0) -> "IgmpMessage":
        return cls(IgmpKind.GROUP_SPECIFIC_QUERY, group, source, pack_mrt(sinr_q, d_bit))


def encode_igmp(msg: IgmpMessage) -> bytes:
    return struct.pack("!I", msg.source_addr) + msg._body(msg.checksum)


def decode_igmp(data: bytes, ap_addr) -> IgmpMessage:
    """Parse a 12-byte IGMP unit.

    Reports with a zero MRT are legacy; queries whose source is not the AP
    are legacy router queries.
    """
    if len(data) != IGMP_WIRE_LEN:
        raise CodecError(f"IGMP unit must be {IGMP_WIRE_LEN} bytes, got {len(data)}")
    source, type_octet, mrt, checksum, group = struct.unpack("!IBBHI", data)
    if internet_checksum(data[4:]) != 0:
        raise CodecError(f"bad IGMP checksum 0x{checksum:04x}")
    if type_octet == IGMP_REPORT:
        kind = IgmpKind.MEMBERSHIP_REPORT if mrt else IgmpKind.LEGACY_REPORT
    elif type_octet == IGMP_QUERY:
        kind = IgmpKind.GROUP_SPECIFIC_QUERY if source == ip_to_int(ap_addr) else IgmpKind.LEGACY_QUERY
    else:
        raise CodecError(f"unknown IGMP type 0x{type_octet:02x}")
    return IgmpMessage(kind, group, source, mrt)


# -- Sequence Control ----------------------------------------------------------

class SeqMode(enum.Enum):
    UNICAST12 = "unicast12"
    MULTICAST9 = "multicast9"


@dataclass(frozen=True)
class SeqControl:
    mode: SeqMode
    frag: int = 0
    seq: int = 0
    tpr: int = 0

    def __post_init__(self):
        if not 0 <= self.frag <= 0xF:
            raise CodecError(f"fragment number out of range: {self.frag}")
        if self.mode is SeqMode.MULTICAST9:
            if not 0 <= self.tpr <= 7:
                raise CodecError(f"TPR out of range: {self.tpr}")
            if not 0 <= self.seq <= 0x1FF:
                raise CodecError(f"9-bit sequence number out of range: {self.seq}")
        else:
            if self.tpr:
                raise CodecError("unicast sequence control has no TPR")
            if not 0 <= self.seq <= 0xFFF:
                raise CodecError(f"12-bit sequence number out of range: {self.seq}")

    @property
    def sequence_subfield(self) -> int:
        if self.mode is SeqMode.MULTICAST9:
            return (self.tpr << 9) | self.seq
        return self.seq


def encode_seq_control(sc: SeqControl) -> int:
    return (sc.sequence_subfield << 4) | sc.frag


def decode_seq_control(word: int, mode: SeqMode) -> SeqControl:
    if not 0 <= word <= 0xFFFF:
        raise CodecError(f"not a 16-bit word: {word}")
    frag = word & 0xF
    sub = word >> 4
    if mode is SeqMode.MULTICAST9:
        return SeqControl(mode, frag, sub & 0x1FF, sub >> 9)
    return SeqControl(mode, frag, sub)


def rram_support_from_duration(duration_us: int) -> bool:
    # plain 802.11 multicast leaves the duration field at zero
    if duration_us < 0:
        raise CodecError(f"negative duration: {duration_us}")
    return duration_us != 0
