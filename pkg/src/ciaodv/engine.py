"""Deterministic discrete-event simulator.

One :class:`Simulator` runs one scenario on a single thread. Events are
ordered by ``(time, seq)`` where ``seq`` is assigned at scheduling time, so
two runs of the same scenario and seed produce the same trace byte for byte.
Randomness comes from ``random.Random`` (Mersenne Twister) streams seeded
from the scenario seed, one stream per concern.

The simulator also keeps a god-view registry of admitted routes that protocol
nodes never see. With ``check=True`` it records violations of the protocol
invariants (limit safety, index truth, loop freedom, RREQ dedup, admission
soundness) in :attr:`Simulator.violations`.
"""
from __future__ import annotations

import heapq
import math
import random
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

from . import node as proto
from .core import (
    DataPacket, fmt_route_id, message_fields, path_is_simple,
)
from .scenarios import ScenarioSpec
from .trace import TRACE_FORMAT, TRACE_VERSION, SimTrace

FAR_AWAY = 1e9


class PastEvent(Exception):
    pass


def _q(t: float) -> float:
    # all event times live on a microsecond grid so traces round-trip exactly
    return round(t, 3)


@dataclass(frozen=True)
class Event:
    at: float
    seq: int
    kind: str
    payload: tuple = ()


class Medium:
    """Unit-disk radio: a transmission reaches every node within ``range``."""

    def __init__(self, positions, radio_range: float, per_hop_latency: float, loss_rate: float):
        self.positions: List[Tuple[float, float]] = [tuple(p) for p in positions]
        self.range = radio_range
        self.per_hop_latency = per_hop_latency
        self.loss_rate = loss_rate

    def in_range(self, a: int, b: int) -> bool:
        (xa, ya), (xb, yb) = self.positions[a], self.positions[b]
        return (xa - xb) ** 2 + (ya - yb) ** 2 <= self.range * self.range

    def receivers(self, sender: int) -> List[int]:
        return [n for n in range(len(self.positions)) if n != sender and self.in_range(sender, n)]


@dataclass
class NodeQueue:
    capacity_pps: Optional[float]
    queue_len_max: int
    queue: deque = field(default_factory=deque)

    @property
    def service_ms(self) -> float:
        return 1000.0 / self.capacity_pps


class RandomWaypoint:
    def __init__(self, rng: random.Random, width: float, height: float,
                 speed_min: float, speed_max: float, pause_ms: float):
        self.rng = rng
        self.width, self.height = width, height
        self.speed_min, self.speed_max = speed_min, speed_max
        self.pause_ms = pause_ms
        self.legs: Dict[int, list] = {}

    def _new_leg(self, now: float):
        target = (self.rng.uniform(0, self.width), self.rng.uniform(0, self.height))
        speed = self.rng.uniform(self.speed_min, self.speed_max)
        return [target, speed, now]  # moving from `now` on

    def step(self, positions, movers, now: float, dt: float) -> None:
        for n in movers:
            leg = self.legs.get(n)
            if leg is None:
                leg = self.legs[n] = self._new_leg(now)
            target, speed, moving_from = leg
            budget = (now + dt - max(now, moving_from)) / 1000.0 * speed
            if budget <= 0 or speed <= 0:
                continue
            x, y = positions[n]
            dist = math.hypot(target[0] - x, target[1] - y)
            if dist <= budget:
                positions[n] = (round(target[0], 6), round(target[1], 6))
                self.legs[n] = self._new_leg(now + dt + self.pause_ms)
            else:
                f = budget / dist
                positions[n] = (round(x + f * (target[0] - x), 6),
                                round(y + f * (target[1] - y), 6))


@dataclass
class RegisteredRoute:
    path: Tuple[int, ...]
    status: str  # activating | active | tearing
    since: float
    holders: set = field(default_factory=set)


class Simulator:
    def __init__(self, spec: ScenarioSpec, seed: Optional[int] = None,
                 protocol: Optional[str] = None, check: bool = False):
        if protocol is not None:
            spec = replace(spec, protocol=protocol)
        if seed is not None:
            spec = replace(spec, seed=seed)
        spec.validate()
        self.spec = spec
        self.seed = spec.seed
        self.ci = spec.protocol == "ci"
        self.check = check
        self.now = 0.0
        self._seq = 0
        self._heap: List[Tuple[float, int, Event]] = []
        self.violations: List[str] = []
        self.index_checks = 0

        n = len(spec.nodes)
        self.labels = spec.labels
        self.medium = Medium([(s.x, s.y) for s in spec.nodes], spec.medium.range,
                             spec.medium.per_hop_latency, spec.medium.loss_rate)
        self.queues = [NodeQueue(s.capacity_pps, s.queue_len_max) for s in spec.nodes]
        limits = {i: s.params.route_limit for i, s in enumerate(spec.nodes)}
        self.limits = limits
        self.states = [proto.init_state(i, s.params, limits, self.ci)
                       for i, s in enumerate(spec.nodes)]
        self.flows = [(spec.node_id(f.src), spec.node_id(f.dst), f) for f in spec.flows]

        self.rng_loss = random.Random(f"{self.seed}/loss")
        self.rng_traffic = [random.Random(f"{self.seed}/flow/{i}") for i in range(len(self.flows))]
        mob = spec.mobility
        self.departed = set()
        self.mobility = None
        if mob.model == "random_waypoint":
            self.mobility = RandomWaypoint(random.Random(f"{self.seed}/mobility"), mob.width,
                                           mob.height, mob.speed_min, mob.speed_max, mob.pause_ms)

        # god view
        self.registry: Dict[tuple, RegisteredRoute] = {}
        self.expected_index = [0] * n
        self._transient = 0  # routes activating or tearing
        self._ctrl_in_flight = 0  # ACT/TEAR deliveries scheduled
        self._dirty = False
        self._rreq_sent = set()
        self._admitted: Dict[int, tuple] = {}
        self.established = 0
        self.ended = 0

        self.trace = SimTrace()
        self._write_header()
        self._boot()

    # -- setup ---------------------------------------------------------------

    def _write_header(self) -> None:
        spec = self.spec
        h = self.trace.header
        h.append(("format", TRACE_FORMAT, TRACE_VERSION))
        h.append(("scenario", spec.name, spec.scenario_hash()))
        h.append(("seed", str(spec.seed)))
        h.append(("protocol", spec.protocol))
        h.append(("duration_ms", f"{spec.duration:.3f}"))
        m = spec.medium
        h.append(("medium", repr(m.range), repr(m.per_hop_latency), repr(m.loss_rate)))
        for i, s in enumerate(spec.nodes):
            limit = "unlimited" if s.params.route_limit is None else str(s.params.route_limit)
            cap = "unlimited" if s.capacity_pps is None else repr(s.capacity_pps)
            h.append(("node", str(i), s.label, limit, cap))
        for i, (src, dst, f) in enumerate(self.flows):
            h.append(("flow", str(i), str(src), str(dst), f"{f.start_at:.3f}", repr(f.rate_pps)))

    def _boot(self) -> None:
        n = len(self.states)
        for i, s in enumerate(self.spec.nodes):
            first = _q(s.params.hello_interval * (i + 1) / (n + 1))
            self.trace.add(0.0, "init", i, "NODE", self.labels[i], repr(s.x), repr(s.y),
                           f"{first:.3f}")
            self.schedule(first, "timer", i, ("hello",))
        for fi, (_src, _dst, f) in enumerate(self.flows):
            self.schedule(f.start_at, "flow_start", fi)
        for label, at in self.spec.mobility.departures:
            self.schedule(at, "depart", self.spec.node_id(label))
        if self.mobility is not None:
            self.schedule(self.spec.mobility.step_ms, "mobility")

    # -- event queue ---------------------------------------------------------

    def schedule(self, at: float, kind: str, *payload) -> Event:
        at = _q(at)
        if at < self.now:
            raise PastEvent(f"event at {at} scheduled before clock {self.now}")
        self._seq += 1
        ev = Event(at, self._seq, kind, payload)
        heapq.heappush(self._heap, (at, self._seq, ev))
        return ev

    def run_until(self, t_end: Optional[float] = None) -> SimTrace:
        t_end = self.spec.duration if t_end is None else t_end
        heap = self._heap
        while heap and heap[0][0] <= t_end:
            ev = heapq.heappop(heap)[2]
            self.now = ev.at
            getattr(self, "_on_" + ev.kind)(*ev.payload)
            if self.check and self._dirty and self._quiescent():
                self._check_index_truth()
        self.now = max(self.now, t_end)
        return self._finish()

    # -- medium --------------------------------------------------------------

    def broadcast_delivery(self, sender: int, msg) -> List[Event]:
        out = []
        for r in self.medium.receivers(sender):
            if self._lost():
                self.trace.add(self.now, "lost", r, msg.kind, sender, "loss")
                continue
            out.append(self._deliver(r, sender, msg))
        return out

    def _lost(self) -> bool:
        return self.medium.loss_rate > 0 and self.rng_loss.random() < self.medium.loss_rate

    def _deliver(self, to: int, frm: int, msg) -> Event:
        if msg.kind in ("ACT", "TEAR"):
            self._ctrl_in_flight += 1
        return self.schedule(self.now + self.medium.per_hop_latency, "deliver", to, frm, msg)

    def _unicast(self, sender: int, to: int, msg) -> None:
        if not self.medium.in_range(sender, to):
            self.trace.add(self.now, "lost", to, msg.kind, sender, "out_of_range")
        elif self._lost():
            self.trace.add(self.now, "lost", to, msg.kind, sender, "loss")
        else:
            self._deliver(to, sender, msg)

    # -- data plane ----------------------------------------------------------

    def forward_data(self, node: int, to: int, packet: DataPacket):
        q = self.queues[node]
        if q.capacity_pps is None:
            self._transmit_data(node, to, packet)
            return ("forwarded", self.now)
        if len(q.queue) >= q.queue_len_max:
            self._drop(node, packet, "QueueFull")
            return ("dropped", "QueueFull")
        q.queue.append((to, packet))
        if len(q.queue) == 1:
            self.schedule(self.now + q.service_ms, "service", node)
        return ("forwarded", _q(self.now + q.service_ms * len(q.queue)))

    def _transmit_data(self, node: int, to: int, packet: DataPacket) -> None:
        self.trace.add(self.now, "tx", node, "DATA", to, *message_fields(packet))
        if not self.medium.in_range(node, to):
            self._drop(node, packet, "LinkBroken")
        elif self._lost():
            self._drop(node, packet, "Lost")
        else:
            self.schedule(self.now + self.medium.per_hop_latency, "deliver", to, node, packet)

    def _drop(self, node: int, packet: DataPacket, reason: str) -> None:
        self.trace.add(self.now, "drop", node, "DATA", reason, *message_fields(packet))

    # -- event handlers ------------------------------------------------------

    def _on_deliver(self, to: int, frm: int, msg) -> None:
        if msg.kind in ("ACT", "TEAR"):
            self._ctrl_in_flight -= 1
            self._dirty = True
        self.trace.add(self.now, "rx", to, msg.kind, frm, *message_fields(msg))
        self._apply(to, *proto.receive(self.states[to], msg, frm, self.now))

    def _on_timer(self, node: int, kind: tuple) -> None:
        self._apply(node, *proto.handle_timer(self.states[node], kind, self.now))

    def _on_service(self, node: int) -> None:
        q = self.queues[node]
        to, packet = q.queue.popleft()
        self._transmit_data(node, to, packet)
        if q.queue:
            self.schedule(self.now + q.service_ms, "service", node)

    def _on_flow_start(self, fi: int) -> None:
        src, dst, _f = self.flows[fi]
        self._apply(src, *proto.request_connection(self.states[src], dst, self.now))
        self._on_gen(fi, 0)

    def _gen_time(self, fi: int, k: int) -> float:
        f = self.flows[fi][2]
        period = 1000.0 / f.rate_pps
        jitter = self.spec.traffic_jitter
        offset = (self.rng_traffic[fi].random() - 0.5) * jitter * period if jitter else 0.0
        return _q(f.start_at + (k + 0.5 * jitter) * period + offset) if jitter else \
            _q(f.start_at + k * period)

    def _on_gen(self, fi: int, k: int) -> None:
        src, dst, f = self.flows[fi]
        packet = DataPacket(fi, k, src, dst, self.now)
        self.trace.add(self.now, "gen", src, "DATA", *message_fields(packet))
        self._apply(src, *proto.send_data(self.states[src], packet, self.now))
        nxt = self._gen_time(fi, k + 1)
        if nxt <= self.spec.duration:
            self.schedule(max(nxt, self.now), "gen", fi, k + 1)

    def _on_depart(self, node: int) -> None:
        self.departed.add(node)
        self.medium.positions[node] = (FAR_AWAY + 10 * self.medium.range * node, FAR_AWAY)
        self.trace.add(self.now, "move", node, "DEPART", *map(repr, self.medium.positions[node]))

    def _on_mobility(self) -> None:
        dt = self.spec.mobility.step_ms
        movers = [n for n in range(len(self.states)) if n not in self.departed]
        self.mobility.step(self.medium.positions, movers, self.now, dt)
        self.schedule(self.now + dt, "mobility")

    # -- applying node actions -------------------------------------------------

    def _apply(self, n: int, state, actions) -> None:
        self.states[n] = state
        if self.check:
            limit = self.limits[n]
            if self.ci and limit is not None and state.own_index > limit:
                self.violations.append(
                    f"{self.now:.3f} limit: node {n} index {state.own_index} > {limit}")
        for a in actions:
            t = type(a)
            if t is proto.Broadcast:
                msg = a.msg
                self.trace.add(self.now, "tx", n, msg.kind, "*", *message_fields(msg))
                if self.check and msg.kind == "RREQ":
                    key = (n, msg.origin, msg.rreq_id)
                    if key in self._rreq_sent:
                        self.violations.append(f"{self.now:.3f} dedup: node {n} resent {key[1:]}")
                    self._rreq_sent.add(key)
                self.broadcast_delivery(n, msg)
            elif t is proto.Unicast:
                self.trace.add(self.now, "tx", n, a.msg.kind, a.to, *message_fields(a.msg))
                self._unicast(n, a.to, a.msg)
            elif t is proto.ForwardData:
                self.forward_data(n, a.to, a.packet)
            elif t is proto.DeliverData:
                self.trace.add(self.now, "deliver", n, "DATA", *message_fields(a.packet))
            elif t is proto.DropData:
                self._drop(n, a.packet, a.reason)
            elif t is proto.SetTimer:
                self.schedule(max(a.at, self.now), "timer", n, a.kind)
            elif t is proto.IndexChanged:
                self.trace.add(self.now, "act", n, "INDEX", fmt_route_id(a.route_id),
                               f"{a.delta:+d}", a.new_index)
                self._registry_index(n, a)
            elif t is proto.EstablishRoute:
                self.trace.add(self.now, "act", n, "ESTABLISH", fmt_route_id(a.route_id),
                               ",".join(map(str, a.path)))
                self._registry_establish(n, a)
            elif t is proto.Admitted:
                self.trace.add(self.now, "act", n, "ADMIT", a.dest,
                               ",".join(f"{x}:{i}" for x, i in a.path_indices))
                self._admitted[n] = tuple(x for x, _ in reversed(a.path_indices))
            elif t is proto.RejectRoute:
                self.trace.add(self.now, "act", n, "REJECT", a.dest,
                               ",".join(map(str, sorted(a.violators))))
            elif t is proto.Discovery:
                self.trace.add(self.now, "act", n, "DISCOVER", a.dest, a.rreq_id, a.attempt,
                               a.reason)
            elif t is proto.RouteEnded:
                self.ended += 1
                self.trace.add(self.now, "act", n, "ROUTE_END", fmt_route_id(a.route_id),
                               a.reason)
            elif t is proto.ConnectionFailed:
                self.trace.add(self.now, "act", n, "FAIL", a.dest, a.reason)
            else:  # pragma: no cover
                raise TypeError(f"unhandled action {a!r}")

    # -- god view --------------------------------------------------------------

    def _registry_establish(self, n: int, a: proto.EstablishRoute) -> None:
        self.established += 1
        self.registry[a.route_id] = RegisteredRoute(tuple(a.path), "activating", self.now)
        self._transient += 1
        self._dirty = True
        if self.check:
            if not path_is_simple(a.path):
                self.violations.append(f"{self.now:.3f} loop: route {a.route_id} path {a.path}")
            admitted = self._admitted.pop(n, None)
            if admitted != tuple(a.path):
                self.violations.append(
                    f"{self.now:.3f} soundness: {a.route_id} established without matching admit")

    def _registry_index(self, n: int, a: proto.IndexChanged) -> None:
        self._dirty = True
        r = self.registry.get(a.route_id)
        if r is None:
            if self.check:
                self.violations.append(f"{self.now:.3f} registry: unknown route {a.route_id}")
            return
        if a.delta > 0:
            r.holders.add(n)
            if r.status == "activating" and r.holders == set(r.path):
                r.status = "active"
                r.since = self.now
                self._transient -= 1
                for x in r.path:
                    self.expected_index[x] += 1
            return
        r.holders.discard(n)
        if r.status == "active":
            for x in r.path:
                self.expected_index[x] -= 1
            self._transient += 1
        if r.status != "tearing":
            r.status = "tearing"
            r.since = self.now
        if not r.holders:
            del self.registry[a.route_id]
            self._transient -= 1

    def _quiescent(self) -> bool:
        return self._ctrl_in_flight == 0

    def _check_index_truth(self) -> None:
        """Compare every settled node's index with the god view.

        Holders of a route that is still activating or being torn down are
        skipped: their count legitimately includes a route the god view
        does not (yet, or any more) treat as active.
        """
        self._dirty = False
        self.index_checks += 1
        unsettled = set()
        if self._transient:
            for r in self.registry.values():
                if r.status != "active":
                    unsettled |= r.holders
        for i, st in enumerate(self.states):
            if i not in unsettled and st.own_index != self.expected_index[i]:
                self.violations.append(
                    f"{self.now:.3f} index: node {i} has {st.own_index}, "
                    f"god view {self.expected_index[i]}")

    def live_routes(self) -> int:
        return sum(1 for r in self.registry.values() if r.status == "active")

    def in_flight_packets(self) -> Dict[int, int]:
        counts: Dict[int, int] = {}
        for st in self.states:
            for pkts in st.buffer.values():
                for p in pkts:
                    counts[p.flow] = counts.get(p.flow, 0) + 1
        for q in self.queues:
            for _to, p in q.queue:
                counts[p.flow] = counts.get(p.flow, 0) + 1
        for _at, _seq, ev in self._heap:
            if ev.kind == "deliver" and isinstance(ev.payload[2], DataPacket):
                p = ev.payload[2]
                counts[p.flow] = counts.get(p.flow, 0) + 1
        return counts

    def _finish(self) -> SimTrace:
        if self.check:
            bound = max(s.params.active_route_timeout for s in self.spec.nodes) + 1000.0
            for rid, r in self.registry.items():
                if r.status != "active" and self.now - r.since > bound:
                    self.violations.append(f"stuck: route {rid} {r.status} since {r.since:.3f}")
        inflight = self.in_flight_packets()
        trace = SimTrace(list(self.trace.header), list(self.trace.records))
        held = sum(len(st.connections) for st in self.states)
        trace.add(self.now, "end", "-", "SUMMARY",
                  ",".join(f"{k}:{v}" for k, v in sorted(inflight.items())) or "-",
                  held, self.live_routes(), self.established, self.ended)
        return trace


def run(spec: ScenarioSpec, seed: Optional[int] = None, protocol: Optional[str] = None,
        duration: Optional[float] = None, check: bool = False) -> SimTrace:
    sim = Simulator(spec, seed=seed, protocol=protocol, check=check)
    return sim.run_until(duration)
