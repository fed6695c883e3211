"""Exhaustive interleaving exploration of the join/sync protocol.

Drives the real SinkCluster/SinkState machines through every reachable
ordering of {send a join, deliver a pending resolution reply, deliver one
queued sync update} at tiny scale, deduplicating global states. Channels are
FIFO per (origin, dest) and bounded; the protocol never blocks on a send, so
the only way to "deadlock" would be a quiescent state that still has an
unresolved sensor - exactly what the caller asserts never exists.
"""

from __future__ import annotations

import copy
from bisect import insort

from flowcluster.model import MatchFields, derive_flow_id, extract_context_key
from flowcluster.sink import SinkCluster


class JoinProtocolModel:
    """Sensors wanting a context id, sinks resolving and syncing."""

    def __init__(self, sensor_plan, num_sinks=2, channel_capacity=8):
        self.cluster = SinkCluster(list(range(1, num_sinks + 1)))
        self.plan = list(sensor_plan)  # (contact sink id, context label)
        self.capacity = channel_capacity
        self.join_sent = [False] * len(self.plan)
        self.context_of = [None] * len(self.plan)
        self.replies: list = []  # sorted (sensor index, context id)

    # -- transition system --------------------------------------------------

    def transitions(self):
        ts = [("join", i) for i, sent in enumerate(self.join_sent) if not sent]
        ts += [("reply", idx, cid) for idx, cid in self.replies]
        ts += [("sync", origin, dest) for origin, dest in self.cluster.pending_channels()]
        return ts

    def apply(self, transition):
        kind = transition[0]
        if kind == "join":
            i = transition[1]
            contact, label = self.plan[i]
            match = MatchFields(label, 1, None)
            resolution = self.cluster.resolve(
                contact, None, derive_flow_id(match), extract_context_key(match)
            )
            self.join_sent[i] = True
            insort(self.replies, (i, resolution.context_id))
        elif kind == "reply":
            _, idx, cid = transition
            self.replies.remove((idx, cid))
            self.context_of[idx] = cid
        else:
            _, origin, dest = transition
            self.cluster.deliver(origin, dest)
        self.cluster.dispatch_outboxes()
        for (_, _), queue in self.cluster.channel_contents().items():
            assert len(queue) <= self.capacity, "bounded channel overflowed"

    def is_terminal(self):
        return not self.transitions()

    # -- canonical form for state dedup -------------------------------------

    def canonical(self):
        sinks = tuple(
            (
                sink.dump_state(),
                tuple(sorted(sink._applied_seq.items())),
                sink._next_seq,
                sink._next_context_serial,
                sink._next_sensor_serial,
            )
            for sink in self.cluster.sinks
        )
        channels = tuple(
            sorted(
                (pair, tuple((u.origin, u.seq) for u in queue))
                for pair, queue in self.cluster.channel_contents().items()
            )
        )
        return (
            tuple(self.join_sent),
            tuple(self.context_of),
            tuple(self.replies),
            sinks,
            channels,
        )


def explore(model: JoinProtocolModel, max_states: int = 500_000):
    """Walk the full reachable state graph; returns (terminals, state count)."""
    seen = {model.canonical()}
    stack = [model]
    terminals = []
    while stack:
        state = stack.pop()
        moves = state.transitions()
        if not moves:
            terminals.append(state)
            continue
        for move in moves:
            nxt = copy.deepcopy(state)
            nxt.apply(move)
            key = nxt.canonical()
            if key not in seen:
                seen.add(key)
                if len(seen) > max_states:
                    raise RuntimeError("state space larger than expected")
                stack.append(nxt)
    return terminals, len(seen)


def assert_liveness(model: JoinProtocolModel):
    """Explore everything; every quiescent state must be fully resolved and
    convergent. Returns (number of terminals, number of states)."""
    terminals, states = explore(model)
    assert terminals, "no quiescent state reachable"
    for terminal in terminals:
        assert all(cid is not None for cid in terminal.context_of), (
            "a flow id never received its context id"
        )
        dumps = terminal.cluster.dumps()
        assert all(d == dumps[0] for d in dumps), "sinks diverged at quiescence"
        by_label = {}
        for (contact, label), cid in zip(terminal.plan, terminal.context_of):
            by_label.setdefault(label, set()).add(cid)
        for label, ids in by_label.items():
            assert len(ids) == 1, f"label {label!r} split across context ids"
        registry = terminal.cluster.sinks[0].context_registry
        assert set(registry) == {label for _, label in terminal.plan}
        values = list(registry.values())
        assert len(values) == len(set(values)), "key<->id not a bijection"
    return len(terminals), states
