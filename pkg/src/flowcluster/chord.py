"""CHORD ring over the sinks' virtual cluster-head nodes.

The ring is static: it is built once from the scenario's sinks and never
rebalanced (no stabilization, no churn). Lookups are iterative; each
closest-preceding-finger forward counts as one overlay hop for latency
accounting.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .errors import RingError
from .hashing import digest64
from .model import ContextId, ContextKey

DEFAULT_M = 32


def ring_position(data: "bytes | str", m: int = DEFAULT_M) -> int:
    """Position of canonical bytes on the 2^m ring (low m bits of digest64)."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    return digest64(data) & ((1 << m) - 1)


def sink_ring_bytes(sink_id: int) -> bytes:
    """Canonical bytes placing a sink's virtual node on the ring."""
    return f"sink/{sink_id}".encode("utf-8")


def _in_open(key: int, lo: int, hi: int) -> bool:
    """key in (lo, hi) on the circle; empty when lo == hi... except the
    degenerate full-circle reading is never needed here (lo==hi -> all but lo)."""
    if lo == hi:
        return key != lo
    if lo < hi:
        return lo < key < hi
    return key > lo or key < hi


def _in_right_closed(key: int, lo: int, hi: int) -> bool:
    """key in (lo, hi] on the circle; lo == hi means the whole circle."""
    if lo == hi:
        return True
    if lo < hi:
        return lo < key <= hi
    return key > lo or key <= hi


@dataclass
class ChordNode:
    node_id: int
    sink_id: int
    fingers: list["ChordNode"] = field(default_factory=list, repr=False)
    predecessor: Optional["ChordNode"] = field(default=None, repr=False)

    @property
    def successor(self) -> "ChordNode":
        return self.fingers[0]

    def owns(self, key: int) -> bool:
        """True iff key lies in (predecessor, self], this node's arc."""
        return _in_right_closed(key, self.predecessor.node_id, self.node_id)

    def closest_preceding_finger(self, key: int) -> "ChordNode":
        for finger in reversed(self.fingers):
            if _in_open(finger.node_id, self.node_id, key):
                return finger
        return self


class ChordRing:
    """Ordered ring of sink nodes with finger tables.

    ``entries`` are (node_id, sink_id) pairs; node ids must be distinct.
    """

    def __init__(self, entries: list[tuple[int, int]], m: int = DEFAULT_M) -> None:
        if not entries:
            raise RingError("ring needs at least one node")
        self.m = m
        space = 1 << m
        seen: set[int] = set()
        for node_id, _ in entries:
            if not 0 <= node_id < space:
                raise RingError(f"node id {node_id} outside [0, 2^{m})")
            if node_id in seen:
                raise RingError(f"duplicate ring position {node_id}")
            seen.add(node_id)
        self.nodes = [ChordNode(nid, sid) for nid, sid in sorted(entries)]
        self._ids = [n.node_id for n in self.nodes]
        self._by_sink = {n.sink_id: n for n in self.nodes}
        for i, node in enumerate(self.nodes):
            node.predecessor = self.nodes[i - 1]
            node.fingers = [
                self.successor_of((node.node_id + (1 << j)) % space)
                for j in range(m)
            ]

    @classmethod
    def from_sinks(cls, sink_ids: list[int], m: int = DEFAULT_M) -> "ChordRing":
        entries = []
        positions: dict[int, int] = {}
        for sid in sink_ids:
            pos = ring_position(sink_ring_bytes(sid), m)
            if pos in positions:
                raise RingError(
                    f"sinks {positions[pos]} and {sid} collide at ring position {pos}"
                )
            positions[pos] = sid
            entries.append((pos, sid))
        return cls(entries, m)

    def successor_of(self, key: int) -> ChordNode:
        """First node at or clockwise after key (bisect on the sorted ids)."""
        idx = bisect_left(self._ids, key)
        if idx == len(self._ids):
            idx = 0
        return self.nodes[idx]

    def node_for_sink(self, sink_id: int) -> ChordNode:
        return self._by_sink[sink_id]

    def find_successor(
        self, key: int, start: Optional[ChordNode] = None
    ) -> tuple[ChordNode, int]:
        """Iterative finger-table lookup; returns (owner node, forwarding hops).

        A node answers for its own arc immediately (it knows its predecessor),
        so looking up a key at its responsible node costs zero hops.
        """
        node = start if start is not None else self.nodes[0]
        if node.owns(key):
            return node, 0
        hops = 0
        while not _in_right_closed(key, node.node_id, node.successor.node_id):
            nxt = node.closest_preceding_finger(key)
            if nxt is node:  # defensive; unreachable with correct fingers
                break
            node = nxt
            hops += 1
        return node.successor, hops


@dataclass(frozen=True)
class LookupResult:
    context_id: Optional[ContextId]
    responsible_sink: int
    overlay_hops: int

    @property
    def found(self) -> bool:
        return self.context_id is not None


def lookup_context(
    ring: ChordRing,
    key: ContextKey,
    registries: Mapping[int, Mapping[ContextKey, ContextId]],
    start: Optional[ChordNode] = None,
) -> LookupResult:
    """Route a context-key lookup to its responsible sink.

    overlay_hops = finger forwards plus the final contact of the responsible
    node when it is not the initiator; this is the unit count the simulator
    converts into sink-to-sink latency.
    """
    owner, hops = ring.find_successor(ring_position(key, ring.m), start)
    if start is not None and owner is not start:
        hops += 1
    context_id = registries[owner.sink_id].get(key)
    return LookupResult(context_id, owner.sink_id, hops)
