"""Deterministic discrete-event simulator.

Replaces the usual stochastic PHY with an abstract channel model: one shared
single-server FIFO at the configured data rate (the collision domain all
senders contend for), Bernoulli delivery loss, and a distance-threshold loss
bump for sensors that wander out of gateway range. All randomness flows from
the scenario seed through named sub-streams, so identical configs produce
bit-identical results; per-packet loss draws are counter-hashed by
(seed, sender, seq) so raising a loss probability can only add losses.

Event order is (time, tie-break counter); the clock never runs backwards.
A run is three phases: join (all resolutions and their sync traffic drain),
traffic (per-sender generation at the configured mean rate), drain
(in-flight deliveries complete). Conservation (tx == rx + queue drops +
channel losses) is asserted at the end of every run.
"""

from __future__ import annotations

import heapq
import math
import random
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

from . import metrics
from .errors import ConfigError, ContractError
from .hashing import derive_seed, digest64, unit_draw
from .metrics import GroupStats, MetricsReport
from .model import MatchFields, Packet, derive_flow_id, extract_context_key
from .sensor import FlowSensor, flush_pending, process_packet
from .sink import Resolution, SinkCluster

# event kinds, dispatched in (time, seq) order
_JOIN = 0
_REPLY = 1
_GENERATE = 2
_DELIVER = 3
_SINK_SYNC = 4
_MOBILITY = 5

TRACE_HEADER = "time,event,group,sensor,seq,delay"


@dataclass(frozen=True)
class MobilityConfig:
    networks: tuple[int, ...] = (2, 3)
    speed_mps: float = 1.0
    bounds_m: tuple[float, float] = (100.0, 100.0)
    step_interval_s: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Full experiment description; defaults follow the standard scenario
    (3 networks x 20 nodes, 3 groups x 9 senders, 512 B at 1 Mbps)."""

    num_networks: int = 3
    nodes_per_network: int = 20
    num_groups: int = 3
    nodes_per_group: int = 9
    flow_rate_pps: float = 8.0
    packet_size_bytes: int = 512
    data_rate_bps: int = 1_000_000
    total_packets: int = 2000
    prop_delay_s: float = 0.001
    sink_link_delay_s: float = 0.002
    base_loss_prob: float = 0.02
    out_of_range_loss_prob: float = 0.25
    range_m: float = 1000.0
    queue_capacity_pkts: int = 50
    duration_s: float = 0.0  # 0 = no time cap; run until total_packets each
    seed: int = 1
    mobility: MobilityConfig = field(default_factory=MobilityConfig)

    def validate(self) -> None:
        for name in ("num_networks", "nodes_per_network", "num_groups",
                     "nodes_per_group", "packet_size_bytes", "data_rate_bps",
                     "total_packets", "queue_capacity_pkts"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.flow_rate_pps <= 0:
            raise ConfigError("flow_rate_pps must be positive")
        if self.num_groups * self.nodes_per_group > self.num_networks * self.nodes_per_network:
            raise ConfigError(
                "num_groups * nodes_per_group exceeds num_networks * nodes_per_network"
            )
        for name in ("prop_delay_s", "sink_link_delay_s", "duration_s"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("base_loss_prob", "out_of_range_loss_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be a probability in [0, 1]")
        if self.range_m <= 0:
            raise ConfigError("range_m must be positive")
        if self.mobility.speed_mps < 0:
            raise ConfigError("mobility.speed_mps must be >= 0")
        if self.mobility.step_interval_s <= 0:
            raise ConfigError("mobility.step_interval_s must be positive")
        if min(self.mobility.bounds_m) <= 0:
            raise ConfigError("mobility.bounds_m must be positive")

    def flat_dict(self) -> dict:
        """Flattened, JSON-friendly echo of every field."""
        out = asdict(self)
        mob = out.pop("mobility")
        out["mobility_networks"] = list(mob["networks"])
        out["mobility_speed_mps"] = mob["speed_mps"]
        out["mobility_bounds_m"] = list(mob["bounds_m"])
        out["mobility_step_interval_s"] = mob["step_interval_s"]
        return out

    def signature(self) -> str:
        """Deterministic run id: digest of the canonical field dump."""
        flat = self.flat_dict()
        canon = ";".join(f"{k}={flat[k]!r}" for k in sorted(flat))
        return f"{digest64(canon.encode()):016x}"

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)


def transmission_delay(size_bytes: int, data_rate_bps: int) -> float:
    """Serialization time of one packet on the channel."""
    if size_bytes <= 0:
        raise ConfigError("packet_size_bytes must be positive")
    if data_rate_bps <= 0:
        raise ConfigError("data_rate_bps must be positive")
    return size_bytes * 8 / data_rate_bps


@dataclass
class Channel:
    """Single-server FIFO; capacity bounds the waiting line (service slot
    excluded). Dropped packets are values for the caller to count."""

    domain: int
    capacity: int
    data_rate_bps: int
    busy_until: float = 0.0
    departures: deque = field(default_factory=deque)

    def waiting(self, now: float) -> int:
        while self.departures and self.departures[0] <= now:
            self.departures.popleft()
        return max(0, len(self.departures) - 1)


def channel_send(ch: Channel, pkt: Packet, now: float) -> tuple[bool, float]:
    """Enqueue a packet; returns (accepted, departure time)."""
    if ch.waiting(now) >= ch.capacity:
        return False, 0.0
    depart = max(now, ch.busy_until) + transmission_delay(pkt.size_bytes, ch.data_rate_bps)
    ch.busy_until = depart
    ch.departures.append(depart)
    return True, depart


def step_mobility(
    sensor: FlowSensor,
    dt: float,
    rng: random.Random,
    speed_mps: float,
    bounds: tuple[float, float],
) -> tuple[float, float]:
    """One random-walk step: fresh uniform heading, reflect at the bounds."""
    if not sensor.mobile:
        raise ContractError("step_mobility called on a fixed sensor")
    heading = rng.uniform(0.0, 2.0 * math.pi)
    x = sensor.position[0] + math.cos(heading) * speed_mps * dt
    y = sensor.position[1] + math.sin(heading) * speed_mps * dt
    x = _reflect(x, bounds[0])
    y = _reflect(y, bounds[1])
    sensor.position = (x, y)
    return sensor.position


def _reflect(value: float, limit: float) -> float:
    while not 0.0 <= value <= limit:
        if value < 0.0:
            value = -value
        else:
            value = 2.0 * limit - value
    return value


@dataclass(frozen=True)
class PacketRecord:
    """Per-packet ground truth for oracle checks and traces."""

    group_index: int
    sensor_id: int
    seq: int
    created_at: float
    depart_time: Optional[float]
    deliver_time: Optional[float]
    status: str  # "rx" | "drop_queue" | "drop_loss"
    delay: Optional[float]


@dataclass
class SimResult:
    report: MetricsReport
    state_dumps: list[str]
    trace_rows: Optional[list[str]] = None
    records: Optional[list[PacketRecord]] = None


class SimWorld:
    """Everything one scenario owns; strictly single-threaded."""

    def __init__(self, cfg: ScenarioConfig):
        cfg.validate()
        self.cfg = cfg
        network_ids = list(range(1, cfg.num_networks + 1))
        self.cluster = SinkCluster(network_ids)
        bounds = cfg.mobility.bounds_m
        self.gateway = {net: (bounds[0] / 2.0, bounds[1] / 2.0) for net in network_ids}
        topo_rng = random.Random(derive_seed(cfg.seed, "topology"))
        mobile_nets = set(cfg.mobility.networks) & set(network_ids)
        self.sensors_by_network: dict[int, list[FlowSensor]] = {}
        for net in network_ids:
            self.sensors_by_network[net] = [
                FlowSensor(
                    network=net,
                    position=(topo_rng.uniform(0, bounds[0]), topo_rng.uniform(0, bounds[1])),
                    mobile=net in mobile_nets,
                )
                for _ in range(cfg.nodes_per_network)
            ]
        self.sensors = [s for net in network_ids for s in self.sensors_by_network[net]]
        self.active: list[tuple[FlowSensor, int]] = []  # (sensor, group index)
        self._assign_groups()
        self.channel = Channel(
            domain=0, capacity=cfg.queue_capacity_pkts, data_rate_bps=cfg.data_rate_bps
        )
        self.stats = {
            g: GroupStats(group_index=g + 1, context_id=0) for g in range(cfg.num_groups)
        }
        self._heap: list = []
        self._eseq = 0
        self.now = 0.0
        self._inflight = 0
        self._open_chains = 0
        self._traffic_start = 0.0
        self._mobility_rng = {
            net: random.Random(derive_seed(cfg.seed, "mobility", net)) for net in network_ids
        }
        self._gap_rng: list[random.Random] = []
        self.trace_rows: Optional[list[str]] = None
        self.records: Optional[list[PacketRecord]] = None

    def _assign_groups(self) -> None:
        """Spread each group's senders across networks, keeping per-network
        load balanced; falls back to the next free network when one fills."""
        cfg = self.cfg
        nets = sorted(self.sensors_by_network)
        used = {net: 0 for net in nets}
        for g in range(cfg.num_groups):
            label = f"ctx-{g + 1}"
            for m in range(cfg.nodes_per_group):
                preferred = (g + m) % len(nets)
                net = next(
                    nets[(preferred + k) % len(nets)]
                    for k in range(len(nets))
                    if used[nets[(preferred + k) % len(nets)]] < cfg.nodes_per_network
                )
                sensor = self.sensors_by_network[net][used[net]]
                used[net] += 1
                sensor.context_label = label
                self.active.append((sensor, g))

    # -- event plumbing ----------------------------------------------------

    def _schedule(self, time: float, kind: int, payload: tuple) -> None:
        heapq.heappush(self._heap, (time, self._eseq, kind, payload))
        self._eseq += 1

    def _flush_sync(self) -> None:
        for dest, update in self.cluster.collect_outgoing():
            self._schedule(self.now + self.cfg.sink_link_delay_s, _SINK_SYNC, (dest, update))

    def _drain(self) -> None:
        while self._heap:
            time, _, kind, payload = heapq.heappop(self._heap)
            assert time >= self.now - 1e-12, "event executed before its cause"
            self.now = max(self.now, time)
            self._dispatch(kind, payload)

    def _dispatch(self, kind: int, payload: tuple) -> None:
        if kind == _GENERATE:
            self._on_generate(*payload)
        elif kind == _DELIVER:
            self._on_deliver(*payload)
        elif kind == _SINK_SYNC:
            dest, update = payload
            self.cluster.sink(dest).apply_sync(update)
            self._apply_remaps()
            self._flush_sync()
        elif kind == _JOIN:
            self._on_join(*payload)
        elif kind == _REPLY:
            self._on_reply(*payload)
        elif kind == _MOBILITY:
            self._on_mobility()

    # -- join phase ----------------------------------------------------------

    def run_join_phase(self) -> None:
        for i, (sensor, g) in enumerate(self.active):
            self._schedule(i * 1e-3, _JOIN, (sensor, g))
        self._drain()
        for sensor, _ in self.active:
            assert sensor.joined, "join phase ended with unresolved sensors"

    def _on_join(self, sensor: FlowSensor, g: int) -> None:
        contact = self.cluster.sink_for_network(sensor.network)
        match = MatchFields(sensor.context_label or "", sensor.port, None)
        resolution = self.cluster.resolve(
            contact.sink_id, sensor.sensor_id, derive_flow_id(match), extract_context_key(match)
        )
        self._flush_sync()
        rtt = 2 * self.cfg.prop_delay_s + resolution.overlay_hops * self.cfg.sink_link_delay_s
        self._schedule(self.now + rtt, _REPLY, (sensor, g, resolution))

    def _on_reply(self, sensor: FlowSensor, g: int, resolution: Resolution) -> None:
        # canonicalize in case a conflict repair landed while the reply flew
        contact = self.cluster.sink_for_network(sensor.network)
        context_id = contact.canonical(resolution.context_id)
        sensor.sensor_id = resolution.sensor_id
        sensor.context_id = context_id
        sensor.subscriptions.add(context_id)
        self.stats[g].context_id = context_id
        for action in flush_pending(sensor):
            self._send(sensor, action.packet, g)

    def _apply_remaps(self) -> None:
        for loser, winner in self.cluster.drain_remaps():
            for sensor in self.sensors:
                if sensor.context_id == loser:
                    sensor.context_id = winner
                if loser in sensor.subscriptions:
                    sensor.subscriptions.discard(loser)
                    sensor.subscriptions.add(winner)
            for stats in self.stats.values():
                if stats.context_id == loser:
                    stats.context_id = winner

    # -- traffic phase ---------------------------------------------------------

    def run_traffic_phase(self) -> None:
        cfg = self.cfg
        self._traffic_start = self.now + 0.01
        phase_rng = random.Random(derive_seed(cfg.seed, "phase"))
        gap = 1.0 / cfg.flow_rate_pps
        self._gap_rng = [
            random.Random(derive_seed(cfg.seed, "gap", slot))
            for slot in range(len(self.active))
        ]
        for slot, (sensor, g) in enumerate(self.active):
            self._open_chains += 1
            self._schedule(
                self._traffic_start + phase_rng.random() * gap, _GENERATE, (slot, sensor, g, 0)
            )
        if any(s.mobile for s in self.sensors):
            self._schedule(
                self._traffic_start + cfg.mobility.step_interval_s, _MOBILITY, ()
            )
        self._drain()

    def _on_generate(self, slot: int, sensor: FlowSensor, g: int, seq: int) -> None:
        cfg = self.cfg
        if cfg.duration_s and self.now - self._traffic_start >= cfg.duration_s:
            self._open_chains -= 1
            return
        pkt = Packet(
            seq=seq,
            match=sensor.match_fields(),
            size_bytes=cfg.packet_size_bytes,
            created_at=self.now,
            sender=sensor.sensor_id,
            group=sensor.context_id,
        )
        action = process_packet(sensor, pkt)
        if action.forward:
            self._send(sensor, pkt, g)
        if seq + 1 < cfg.total_packets:
            # mean gap is exactly 1/rate; the +-10% jitter keeps queue-drop
            # incidence from phase-locking onto a fixed subset of senders
            gap = (0.9 + 0.2 * self._gap_rng[slot].random()) / cfg.flow_rate_pps
            self._schedule(self.now + gap, _GENERATE, (slot, sensor, g, seq + 1))
        else:
            self._open_chains -= 1

    def _out_of_range(self, sensor: FlowSensor) -> bool:
        return math.dist(sensor.position, self.gateway[sensor.network]) > self.cfg.range_m

    def _send(self, sensor: FlowSensor, pkt: Packet, g: int) -> None:
        stats = self.stats[g]
        metrics.record_tx(stats)
        accepted, depart = channel_send(self.channel, pkt, self.now)
        if not accepted:
            stats.lost_queue += 1
            self._record(g, pkt, None, None, "drop_queue", None)
            return
        # out-of-range senders relay through peers, abstracted as a higher
        # loss probability plus one overlay hop of extra latency
        if self._out_of_range(sensor):
            loss_prob = self.cfg.out_of_range_loss_prob
            relay_extra = self.cfg.sink_link_delay_s
        else:
            loss_prob = self.cfg.base_loss_prob
            relay_extra = 0.0
        lost = unit_draw(self.cfg.seed, "loss", pkt.sender, pkt.seq) < loss_prob
        self._inflight += 1
        self._schedule(
            depart + self.cfg.prop_delay_s + relay_extra, _DELIVER, (pkt, g, depart, lost)
        )

    def _on_deliver(self, pkt: Packet, g: int, depart: float, lost: bool) -> None:
        self._inflight -= 1
        stats = self.stats[g]
        if lost:
            stats.lost_channel += 1
            self._record(g, pkt, depart, None, "drop_loss", None)
            return
        delay = self.now - pkt.created_at
        metrics.record_rx(stats, delay)
        self._record(g, pkt, depart, self.now, "rx", delay)

    def _on_mobility(self) -> None:
        cfg = self.cfg
        for net in sorted(self.sensors_by_network):
            rng = self._mobility_rng[net]
            for sensor in self.sensors_by_network[net]:
                if sensor.mobile:
                    step_mobility(
                        sensor, cfg.mobility.step_interval_s, rng,
                        cfg.mobility.speed_mps, cfg.mobility.bounds_m,
                    )
        if self._open_chains or self._inflight:
            self._schedule(self.now + cfg.mobility.step_interval_s, _MOBILITY, ())

    # -- bookkeeping -------------------------------------------------------------

    def _record(
        self,
        g: int,
        pkt: Packet,
        depart: Optional[float],
        deliver: Optional[float],
        status: str,
        delay: Optional[float],
    ) -> None:
        if self.trace_rows is not None:
            stamp = deliver if deliver is not None else self.now
            delay_col = "" if delay is None else repr(delay)
            self.trace_rows.append(
                f"{stamp!r},{status},{g + 1},{pkt.sender},{pkt.seq},{delay_col}"
            )
        if self.records is not None:
            self.records.append(
                PacketRecord(g + 1, pkt.sender or 0, pkt.seq, pkt.created_at,
                             depart, deliver, status, delay)
            )

    def check_conservation(self) -> None:
        for stats in self.stats.values():
            assert stats.tx_count == stats.rx_count + stats.lost_queue + stats.lost_channel, (
                f"group {stats.group_index}: conservation violated"
            )
        assert self._inflight == 0, "packets still in flight at quiescence"

    def build_result(self) -> SimResult:
        report = metrics.build_report(
            run_id=self.cfg.signature(),
            seed=self.cfg.seed,
            config=self.cfg.flat_dict(),
            stats=list(self.stats.values()),
        )
        return SimResult(
            report=report,
            state_dumps=self.cluster.dumps(),
            trace_rows=self.trace_rows,
            records=self.records,
        )


def build_topology(cfg: ScenarioConfig) -> SimWorld:
    """Construct the simulated world without running it."""
    return SimWorld(cfg)


def run(
    cfg: ScenarioConfig, trace: bool = False, keep_records: bool = False
) -> SimResult:
    """Execute one scenario end to end; bit-identical for identical configs."""
    world = SimWorld(cfg)
    if trace:
        world.trace_rows = []
    if keep_records:
        world.records = []
    world.run_join_phase()
    world.run_traffic_phase()
    world.check_conservation()
    dumps = world.cluster.dumps()
    assert all(d == dumps[0] for d in dumps), "sinks diverged at quiescence"
    return world.build_result()
