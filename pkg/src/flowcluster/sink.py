"""Distributed logical sink: resolution, context/group tables, pub/sub sync.

Physically there is one SinkState per gateway; logically they act as one
controller. Every local change is broadcast as a SyncUpdate over a reliable,
per-origin-ordered channel and applied idempotently, so at quiescence all
sinks serialize to identical state. Two sinks racing to define a context id
for one key converge by "lower context id wins"; losers are remapped
everywhere, which keeps the key<->id mapping a global bijection.

SinkCluster owns the ring and the broadcast bookkeeping. It has no clock of
its own: the simulator schedules deliveries as timed events, while protocol
tests drive `deliver`/`run_to_quiescence` directly with whatever interleaving
they want.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterator, Optional

from .chord import ChordRing, lookup_context
from .errors import InvalidRequestError
from .model import (
    ContextFlowTableEntry,
    ContextId,
    ContextKey,
    FlowId,
    GroupTable,
    SensorId,
)

# context/sensor id layout: sink index in the high 32 bits, serial below
_PARTITION_SHIFT = 32


@dataclass(frozen=True)
class SyncUpdate:
    """One replicated state change; (origin, seq) identifies it for replay."""

    origin: int
    seq: int
    kind: str  # "new_context" | "new_member" | "publish"
    key: Optional[ContextKey] = None
    context_id: Optional[ContextId] = None
    sensor_id: Optional[SensorId] = None
    flow_id: Optional[FlowId] = None


@dataclass(frozen=True)
class Resolution:
    context_id: ContextId
    sensor_id: SensorId
    newly_defined: bool
    overlay_hops: int


class SinkState:
    """State machine of one physical sink."""

    def __init__(self, sink_id: int, network_id: int) -> None:
        self.sink_id = sink_id
        self.network_id = network_id
        self.context_registry: dict[ContextKey, ContextId] = {}
        self.context_flow_table: dict[tuple[SensorId, FlowId], ContextFlowTableEntry] = {}
        self.group_table = GroupTable()
        self.published: set[ContextId] = set()
        self.outbox: list[SyncUpdate] = []
        self.remap_log: list[tuple[ContextId, ContextId]] = []
        self._aliases: dict[ContextId, ContextId] = {}
        self._next_seq = 0
        self._applied_seq: dict[int, int] = {}
        self._next_context_serial = 1
        self._next_sensor_serial = 1

    # -- local authoritative actions -------------------------------------

    def mint_context(self, key: ContextKey) -> ContextId:
        """Define and publish a fresh context id for a never-seen key."""
        context_id = (self.sink_id << _PARTITION_SHIFT) | self._next_context_serial
        self._next_context_serial += 1
        self.context_registry[key] = context_id
        self.published.add(context_id)
        self._broadcast("new_context", key=key, context_id=context_id)
        self._broadcast("publish", context_id=context_id)
        return context_id

    def allocate_sensor_id(self) -> SensorId:
        sensor_id = (self.sink_id << _PARTITION_SHIFT) | self._next_sensor_serial
        self._next_sensor_serial += 1
        return sensor_id

    def adopt(self, key: ContextKey, context_id: ContextId) -> None:
        """Cache a remotely resolved (key, id) pair; no broadcast needed."""
        self.context_registry.setdefault(key, self.canonical(context_id))

    def record_membership(
        self, context_id: ContextId, sensor_id: SensorId, flow_id: Optional[FlowId]
    ) -> bool:
        """Bind the sensor into the context tables; False if already bound."""
        context_id = self.canonical(context_id)
        if flow_id is not None:
            entry = ContextFlowTableEntry(sensor_id, flow_id, context_id)
            if self.context_flow_table.get((sensor_id, flow_id)) == entry:
                return False
            self.context_flow_table[(sensor_id, flow_id)] = entry
        elif sensor_id in self.group_table.members(context_id):
            return False
        self.group_table.add(context_id, sensor_id)
        self._broadcast(
            "new_member", context_id=context_id, sensor_id=sensor_id, flow_id=flow_id
        )
        return True

    def publish_context(self, context_id: ContextId) -> None:
        """Mark a known context id published; re-publishing is a no-op."""
        context_id = self.canonical(context_id)
        if context_id not in self.context_registry.values():
            raise InvalidRequestError(f"unknown context id {context_id:#x}")
        if context_id in self.published:
            return
        self.published.add(context_id)
        self._broadcast("publish", context_id=context_id)

    def subscribe(self, sensor_id: SensorId, context_id: ContextId) -> bool:
        """Add the sensor to a published cluster; False if never published."""
        context_id = self.canonical(context_id)
        if context_id not in self.published:
            return False
        self.record_membership(context_id, sensor_id, None)
        return True

    # -- replication ------------------------------------------------------

    def _broadcast(self, kind: str, **payload: object) -> None:
        self.outbox.append(SyncUpdate(self.sink_id, self._next_seq, kind, **payload))
        self._next_seq += 1

    def apply_sync(self, update: SyncUpdate) -> str:
        """Apply one peer update; returns "applied" or "duplicate".

        Idempotent by (origin, seq): replays change nothing. Per-origin
        delivery order is a channel guarantee, so seq only moves forward.
        """
        if update.origin == self.sink_id:
            raise InvalidRequestError("a sink never applies its own updates")
        last = self._applied_seq.get(update.origin, -1)
        if update.seq <= last:
            return "duplicate"
        self._applied_seq[update.origin] = update.seq
        if update.kind == "new_context":
            self._apply_new_context(update.key, update.context_id)
        elif update.kind == "new_member":
            context_id = self.canonical(update.context_id)
            self.group_table.add(context_id, update.sensor_id)
            if update.flow_id is not None:
                entry = ContextFlowTableEntry(update.sensor_id, update.flow_id, context_id)
                self.context_flow_table[(update.sensor_id, update.flow_id)] = entry
        elif update.kind == "publish":
            self.published.add(self.canonical(update.context_id))
        else:
            raise InvalidRequestError(f"unknown sync kind {update.kind!r}")
        return "applied"

    def _apply_new_context(self, key: ContextKey, context_id: ContextId) -> None:
        incoming = self.canonical(context_id)
        existing = self.context_registry.get(key)
        if existing is None:
            self.context_registry[key] = incoming
            return
        if existing == incoming:
            return
        # concurrent definitions for one key: lower id wins everywhere
        winner, loser = min(existing, incoming), max(existing, incoming)
        self.context_registry[key] = winner
        self._aliases[loser] = winner
        self._remap(loser, winner)

    def canonical(self, context_id: ContextId) -> ContextId:
        """Follow conflict aliases to the surviving context id."""
        while context_id in self._aliases:
            context_id = self._aliases[context_id]
        return context_id

    def _remap(self, loser: ContextId, winner: ContextId) -> None:
        self.group_table.remap(loser, winner)
        for pair, entry in list(self.context_flow_table.items()):
            if entry.context_id == loser:
                self.context_flow_table[pair] = ContextFlowTableEntry(
                    entry.sensor_id, entry.flow_id, winner
                )
        if loser in self.published:
            self.published.discard(loser)
            self.published.add(winner)
        self.remap_log.append((loser, winner))

    # -- serialization ----------------------------------------------------

    def dump_state(self) -> str:
        """Deterministic sorted text form of the replicated state.

        Identical across sinks at quiescence; the sink's own identity is
        deliberately not part of the payload so dumps compare byte-equal.
        """
        lines = []
        for key in sorted(self.context_registry):
            cid = self.context_registry[key]
            published = "yes" if cid in self.published else "no"
            lines.append(f"context {key} {cid:#018x} published={published}")
        for cid, members in sorted(self.group_table.groups().items()):
            for sensor in sorted(members):
                lines.append(f"member {cid:#018x} {sensor:#018x}")
        for sensor_id, flow_id in sorted(self.context_flow_table):
            entry = self.context_flow_table[(sensor_id, flow_id)]
            lines.append(
                f"flow {sensor_id:#018x} {flow_id:#018x} {entry.context_id:#018x}"
            )
        return "\n".join(lines) + "\n"


class SinkCluster:
    """All sinks of one scenario plus the overlay ring and sync channels."""

    def __init__(self, network_ids: list[int], m: int = 32) -> None:
        self.sinks = [SinkState(i, net) for i, net in enumerate(network_ids)]
        self.ring = ChordRing.from_sinks([s.sink_id for s in self.sinks], m)
        self._sensor_ids: set[SensorId] = set()
        # per (origin, dest) FIFO; preserves the per-origin order guarantee
        self._channels: dict[tuple[int, int], deque[SyncUpdate]] = {}

    def sink(self, sink_id: int) -> SinkState:
        return self.sinks[sink_id]

    def sink_for_network(self, network_id: int) -> SinkState:
        for sink in self.sinks:
            if sink.network_id == network_id:
                return sink
        raise InvalidRequestError(f"no sink for network {network_id}")

    # -- resolution (the forward/reverse path of a join) ------------------

    def resolve(
        self,
        contact_id: int,
        sensor_id: Optional[SensorId],
        flow_id: FlowId,
        key: ContextKey,
    ) -> Resolution:
        """Resolve a flow id to a context id, minting and publishing on a
        global miss; assigns a sensor id when the sensor has none yet."""
        if not key:
            raise InvalidRequestError("empty context key")
        contact = self.sinks[contact_id]
        newly_defined = False
        hops = 0
        context_id = contact.context_registry.get(key)
        answering = contact
        if context_id is None:
            registries = {s.sink_id: s.context_registry for s in self.sinks}
            result = lookup_context(
                self.ring, key, registries, start=self.ring.node_for_sink(contact_id)
            )
            hops = result.overlay_hops
            answering = self.sinks[result.responsible_sink]
            if result.found:
                context_id = result.context_id
            else:
                context_id = answering.mint_context(key)
                newly_defined = True
            if contact is not answering:
                contact.adopt(key, context_id)
        if sensor_id is None:
            sensor_id = self.allocate_sensor_id(answering)
        contact.record_membership(context_id, sensor_id, flow_id)
        return Resolution(contact.canonical(context_id), sensor_id, newly_defined, hops)

    def allocate_sensor_id(self, sink: SinkState) -> SensorId:
        """Partitioned allocation with a global duplicate check."""
        sensor_id = sink.allocate_sensor_id()
        if sensor_id in self._sensor_ids:
            raise InvalidRequestError(f"duplicate sensor id {sensor_id:#x}")
        self._sensor_ids.add(sensor_id)
        return sensor_id

    def register_sensor_id(self, sensor_id: SensorId) -> None:
        """Register an externally chosen id; duplicates are rejected."""
        if sensor_id in self._sensor_ids:
            raise InvalidRequestError(f"duplicate sensor id {sensor_id:#x}")
        self._sensor_ids.add(sensor_id)

    # -- sync transport ----------------------------------------------------

    def collect_outgoing(self) -> list[tuple[int, SyncUpdate]]:
        """Drain every sink's outbox; one (dest, update) pair per recipient.

        Used by the simulator, which turns each pair into a timed delivery.
        """
        out = []
        for sink in self.sinks:
            updates, sink.outbox = sink.outbox, []
            for update in updates:
                for peer in self.sinks:
                    if peer.sink_id != sink.sink_id:
                        out.append((peer.sink_id, update))
        return out

    def dispatch_outboxes(self) -> None:
        """Move outbox contents into the in-cluster FIFO channels (test driver)."""
        for dest, update in self.collect_outgoing():
            self._channels.setdefault((update.origin, dest), deque()).append(update)

    def pending_channels(self) -> list[tuple[int, int]]:
        return sorted(pair for pair, q in self._channels.items() if q)

    def channel_contents(self) -> dict[tuple[int, int], tuple[SyncUpdate, ...]]:
        """Snapshot of undelivered updates per (origin, dest) channel."""
        return {pair: tuple(q) for pair, q in self._channels.items() if q}

    def deliver(self, origin: int, dest: int) -> str:
        """Deliver the head of one (origin, dest) channel."""
        queue = self._channels.get((origin, dest))
        if not queue:
            raise InvalidRequestError(f"no pending update on channel {origin}->{dest}")
        outcome = self.sinks[dest].apply_sync(queue.popleft())
        self.dispatch_outboxes()
        return outcome

    def run_to_quiescence(self, choose=None) -> None:
        """Deliver until no update is in flight.

        ``choose(pending)`` picks the next (origin, dest) channel; defaults to
        the first in sorted order. Randomized tests pass their own chooser.
        """
        self.dispatch_outboxes()
        pending = self.pending_channels()
        while pending:
            pair = pending[0] if choose is None else choose(pending)
            self.deliver(*pair)
            pending = self.pending_channels()

    # -- whole-cluster views -----------------------------------------------

    def dumps(self) -> list[str]:
        return [sink.dump_state() for sink in self.sinks]

    def context_ids(self) -> set[ContextId]:
        ids: set[ContextId] = set()
        for sink in self.sinks:
            ids.update(sink.context_registry.values())
        return ids

    def drain_remaps(self) -> Iterator[tuple[ContextId, ContextId]]:
        for sink in self.sinks:
            log, sink.remap_log = sink.remap_log, []
            yield from log
