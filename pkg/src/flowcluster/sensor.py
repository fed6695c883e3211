"""Flow-sensor state machine: local flow table, forwarding, join behavior."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import InvalidMatchError, ResolutionError
from .model import (
    ContextId,
    FlowEntry,
    FlowId,
    MatchFields,
    Packet,
    SensorId,
    derive_flow_id,
    extract_context_key,
    install_entry,
    match_packet,
    update_statistics,
)

# packets a sensor will hold while its join is still pending
PREJOIN_BUFFER_LIMIT = 16


@dataclass(frozen=True)
class SensorAction:
    """Outcome of the sensor pipeline: drop, or forward to the nearby sink."""

    forward: bool
    flow_id: Optional[FlowId] = None
    packet: Optional[Packet] = None

    @classmethod
    def drop(cls) -> "SensorAction":
        return cls(forward=False)

    @classmethod
    def forward_to_sink(cls, flow_id: FlowId, packet: Packet) -> "SensorAction":
        return cls(forward=True, flow_id=flow_id, packet=packet)


@dataclass(frozen=True)
class JoinOutcome:
    context_id: ContextId
    formed_new: bool


@dataclass
class FlowSensor:
    network: int
    position: tuple[float, float]
    mobile: bool = False
    context_label: Optional[str] = None
    port: int = 1
    sensor_id: Optional[SensorId] = None
    context_id: Optional[ContextId] = None
    flow_table: list[FlowEntry] = field(default_factory=list)
    subscriptions: set[ContextId] = field(default_factory=set)
    pending: list[Packet] = field(default_factory=list)

    @property
    def joined(self) -> bool:
        return self.context_id is not None

    def match_fields(self) -> MatchFields:
        """Match fields of this sensor's current flow."""
        if not self.context_label:
            raise InvalidMatchError("sensor has no context label")
        return MatchFields(self.context_label, self.port, self.sensor_id)


def process_packet(sensor: FlowSensor, pkt: Packet) -> SensorAction:
    """Run one packet through the sensor's flow-table pipeline.

    Empty packets are dropped. A table miss installs a fresh entry; a
    statistics mismatch re-derives the flow id from the packet's own match
    fields. While the join is unresolved the packet is parked in the pre-join
    buffer (up to PREJOIN_BUFFER_LIMIT, then dropped) and nothing is
    forwarded yet.
    """
    if not pkt.match.context_label or not pkt.match.context_label.strip():
        return SensorAction.drop()
    entry = match_packet(sensor.flow_table, pkt)
    if entry is None:
        entry = install_entry(sensor.flow_table, pkt.match)
    consistent = update_statistics(entry, pkt)
    flow_id = entry.flow_id if consistent else derive_flow_id(pkt.match)
    if not consistent:
        entry.flow_id = flow_id
    if not sensor.joined:
        if len(sensor.pending) < PREJOIN_BUFFER_LIMIT:
            sensor.pending.append(pkt)
        return SensorAction.drop()
    return SensorAction.forward_to_sink(flow_id, pkt)


def flush_pending(sensor: FlowSensor) -> list[SensorAction]:
    """Forward packets buffered before the join completed (in arrival order)."""
    if not sensor.joined:
        return []
    actions = []
    for pkt in sensor.pending:
        actions.append(SensorAction.forward_to_sink(derive_flow_id(pkt.match), pkt))
    sensor.pending = []
    return actions


def join(sensor: FlowSensor, cluster, contact_sink_id: int) -> JoinOutcome:
    """Resolve this sensor's flow against the logical sink.

    Sends the flow id derived from the sensor's (still source-less) match
    fields; the sink answers with the context id and, when needed, a fresh
    sensor id. Retriable ResolutionError when no sink can be reached.
    """
    if sensor.joined:
        return JoinOutcome(sensor.context_id, formed_new=False)
    if cluster is None:
        raise ResolutionError("sink unreachable; retry the join")
    match = MatchFields(sensor.context_label or "", sensor.port, None)
    flow_id = derive_flow_id(match)
    key = extract_context_key(match)
    resolution = cluster.resolve(contact_sink_id, sensor.sensor_id, flow_id, key)
    sensor.sensor_id = resolution.sensor_id
    sensor.context_id = resolution.context_id
    sensor.subscriptions.add(resolution.context_id)
    return JoinOutcome(resolution.context_id, formed_new=resolution.newly_defined)
