"""Core data model: identifiers, match fields, flow tables, packets.

Identifier conventions
----------------------
SensorId / FlowId / ContextId are plain 64-bit unsigned ints. A flow id is
the digest of the canonical serialization of its match fields; a context key
is the normalized context label. The canonical byte layout (the only
externally visible encoding) is::

    context_label utf-8 bytes || port as u16 little-endian || source as u64
    little-endian (0xFFFFFFFFFFFFFFFF when the sensor id is unassigned)

The layout is unambiguous: the last 10 bytes are always port+source, the
rest is the label.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import IdCollisionError, InvalidMatchError
from .hashing import digest64

SensorId = int
FlowId = int
ContextId = int
ContextKey = str

UNASSIGNED_SOURCE = (1 << 64) - 1


@dataclass(frozen=True)
class MatchFields:
    """Packet-header fields a flow entry matches on."""

    context_label: str
    port: int = 0
    source: Optional[SensorId] = None


def canonical_match_bytes(match: MatchFields) -> bytes:
    """Canonical serialization of match fields (documented byte-exact above)."""
    _require_label(match)
    source = UNASSIGNED_SOURCE if match.source is None else match.source
    return (
        match.context_label.encode("utf-8")
        + match.port.to_bytes(2, "little")
        + source.to_bytes(8, "little")
    )


def derive_flow_id(match: MatchFields) -> FlowId:
    """Flow id = 64-bit digest of the canonical match serialization.

    Pure: equal match fields always give equal flow ids.
    """
    return digest64(canonical_match_bytes(match))


def extract_context_key(match: MatchFields) -> ContextKey:
    """Normalized context label: whitespace-trimmed and lowercased.

    Two flows belong to the same context iff their keys are byte-equal;
    the key is location- and sensor-agnostic by construction.
    """
    _require_label(match)
    key = match.context_label.strip().lower()
    if not key:
        raise InvalidMatchError("context_label is whitespace only")
    return key


def _require_label(match: MatchFields) -> None:
    if not match.context_label:
        raise InvalidMatchError("context_label must be non-empty")


@dataclass
class FlowStats:
    """Per-entry statistics; counters only grow."""

    packet_count: int = 0
    byte_count: int = 0
    last_match: Optional[MatchFields] = None


@dataclass
class FlowEntry:
    match: MatchFields
    flow_id: FlowId
    stats: FlowStats = field(default_factory=FlowStats)


@dataclass(frozen=True)
class ContextFlowTableEntry:
    """The (sensor-id, flow-id, context-id) binding kept by every sink."""

    sensor_id: SensorId
    flow_id: FlowId
    context_id: ContextId


@dataclass(frozen=True)
class Packet:
    seq: int
    match: MatchFields
    size_bytes: int
    created_at: float
    sender: Optional[SensorId]
    group: Optional[ContextId] = None

    def __post_init__(self) -> None:
        if self.size_bytes <= 0:
            raise ValueError("size_bytes must be positive")
        if self.created_at < 0:
            raise ValueError("created_at must be >= 0")


def match_packet(table: list[FlowEntry], pkt: Packet) -> Optional[FlowEntry]:
    """First entry whose match equals the packet's match; None on miss."""
    for entry in table:
        if entry.match == pkt.match:
            return entry
    return None


def update_statistics(entry: FlowEntry, pkt: Packet) -> bool:
    """Account the packet on the entry; True iff it matched the last one seen.

    Counters advance either way. A False return means the flow changed under
    the entry and the caller must re-derive the flow id.
    """
    stats = entry.stats
    consistent = stats.last_match is None or stats.last_match == pkt.match
    stats.packet_count += 1
    stats.byte_count += pkt.size_bytes
    stats.last_match = pkt.match
    return consistent


def install_entry(table: list[FlowEntry], match: MatchFields) -> FlowEntry:
    """Append a new entry for the match, deriving its flow id.

    A digest collision (same flow id already installed for different match
    fields) is fatal; it is never silently merged.
    """
    flow_id = derive_flow_id(match)
    for entry in table:
        if entry.flow_id == flow_id and entry.match != match:
            raise IdCollisionError(f"flow id collision on {flow_id:#018x}")
    entry = FlowEntry(match=match, flow_id=flow_id)
    table.append(entry)
    return entry


class GroupTable:
    """Cluster membership: context id -> set of sensor ids."""

    def __init__(self) -> None:
        self._members: dict[ContextId, set[SensorId]] = {}

    def add(self, context_id: ContextId, sensor_id: SensorId) -> None:
        self._members.setdefault(context_id, set()).add(sensor_id)

    def members(self, context_id: ContextId) -> frozenset[SensorId]:
        return frozenset(self._members.get(context_id, ()))

    def groups(self) -> dict[ContextId, frozenset[SensorId]]:
        return {cid: frozenset(m) for cid, m in self._members.items()}

    def remap(self, loser: ContextId, winner: ContextId) -> None:
        """Fold the loser group into the winner (context-id conflict repair)."""
        if loser in self._members:
            self._members.setdefault(winner, set()).update(self._members.pop(loser))

    def __len__(self) -> int:
        return len(self._members)

    def __contains__(self, context_id: ContextId) -> bool:
        return context_id in self._members
