"""Per-node AODV state machine with connection-index admission.

Every public transition takes a :class:`NodeState` plus an input and the
current time and returns ``(new_state, actions)``. The input state is never
mutated; actions are the only way a node affects the world.

Connection accounting
---------------------
A node's *connection index* is the number of admitted end-to-end routes that
traverse it, endpoints included. The source checks every on-path index
against that node's ``route_limit`` when the route reply comes back, commits
the route, and walks an ``ACT`` message down the path so each node bumps its
index. ``TEAR`` walks the other way on release. With ``ci=False`` (baseline
AODV) the same bookkeeping runs but admission always passes.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Mapping, Optional, Tuple

from .core import (
    ACT, HELLO, RERR, RREP, RREQ, TEAR, DataPacket, NodeId, RouteEntry, RouteId,
    RouteState, path_is_simple, seqno_inc, seqno_newer,
)


class AlreadyPending(Exception):
    """A discovery toward this destination is already in flight."""


class UnknownRoute(Exception):
    """The route id is not active at this node."""


@dataclass(frozen=True)
class NodeParams:
    route_limit: Optional[int] = None  # None means unlimited
    hello_interval: float = 1000.0
    allowed_hello_loss: int = 2
    active_route_timeout: float = 10000.0
    rreq_retries: int = 2
    rreq_retry_wait: float = 1000.0
    reply_window: float = 100.0
    buffer_max: int = 64
    rreq_retention: float = 5000.0
    intermediate_reply: bool = False
    prune_at_limit: bool = False

    def __post_init__(self):
        if self.route_limit is not None and self.route_limit < 1:
            raise ValueError("route_limit must be a positive integer or None")


@dataclass(frozen=True)
class PendingDiscovery:
    dest: NodeId
    attempt: int
    excluded: FrozenSet[NodeId]
    started_at: float
    rreq_id: int
    reason: str = "new"
    rejected: bool = False
    best_reply: Optional[RREP] = None
    best_at: float = 0.0


@dataclass(frozen=True)
class CarriedRoute:
    path: Tuple[NodeId, ...]
    position: int
    expires_at: float


@dataclass(frozen=True)
class Connection:
    """Source-side record of the request that produced an admitted route."""

    route_id: RouteId
    attempt: int
    excluded: FrozenSet[NodeId]
    started_at: float


# -- admission ---------------------------------------------------------------

@dataclass(frozen=True)
class Admit:
    pass


@dataclass(frozen=True)
class Reject:
    violators: FrozenSet


ADMIT = Admit()


def admission_check(path_indices, route_limit):
    """Check every (node, index) on a candidate route against its limit.

    ``route_limit`` is either one limit for every node (``None`` meaning
    unlimited) or a mapping from node to limit. A node passes when it can
    take one more route, i.e. ``index < limit``.
    """
    if isinstance(route_limit, Mapping):
        limit_of = route_limit.get
    else:
        limit_of = lambda _node: route_limit  # noqa: E731
    violators = set()
    for node, index in path_indices:
        limit = limit_of(node)
        if limit is not None and index >= limit:
            violators.add(node)
    if violators:
        return Reject(frozenset(violators))
    return ADMIT


# -- actions -----------------------------------------------------------------

@dataclass(frozen=True)
class Broadcast:
    msg: object


@dataclass(frozen=True)
class Unicast:
    to: NodeId
    msg: object


@dataclass(frozen=True)
class ForwardData:
    to: NodeId
    packet: DataPacket


@dataclass(frozen=True)
class DeliverData:
    packet: DataPacket


@dataclass(frozen=True)
class DropData:
    packet: DataPacket
    reason: str


@dataclass(frozen=True)
class SetTimer:
    kind: tuple
    at: float


@dataclass(frozen=True)
class Discovery:
    dest: NodeId
    rreq_id: int
    attempt: int
    reason: str


@dataclass(frozen=True)
class Admitted:
    dest: NodeId
    path_indices: Tuple[Tuple[NodeId, int], ...]


@dataclass(frozen=True)
class EstablishRoute:
    route_id: RouteId
    path: Tuple[NodeId, ...]


@dataclass(frozen=True)
class RejectRoute:
    dest: NodeId
    violators: FrozenSet[NodeId]


@dataclass(frozen=True)
class IndexChanged:
    route_id: RouteId
    delta: int
    new_index: int


@dataclass(frozen=True)
class RouteEnded:
    route_id: RouteId
    reason: str


@dataclass(frozen=True)
class ConnectionFailed:
    dest: NodeId
    reason: str


# -- state -------------------------------------------------------------------

@dataclass
class NodeState:
    me: NodeId
    params: NodeParams = NodeParams()
    ci: bool = True
    # route limit of every node in the network, configured beforehand
    limits: Mapping[NodeId, Optional[int]] = field(default_factory=dict)
    own_seqno: int = 0
    next_rreq_id: int = 0
    next_route_serial: int = 0
    last_hello_at: Optional[float] = None
    routing_table: Dict[NodeId, RouteEntry] = field(default_factory=dict)
    neighbors: Dict[NodeId, float] = field(default_factory=dict)
    index_table: Dict[NodeId, int] = field(default_factory=dict)
    rreq_seen: Dict[Tuple[NodeId, int], float] = field(default_factory=dict)
    pending: Dict[NodeId, PendingDiscovery] = field(default_factory=dict)
    carried: Dict[RouteId, CarriedRoute] = field(default_factory=dict)
    connections: Dict[NodeId, Connection] = field(default_factory=dict)
    wanted: FrozenSet[NodeId] = frozenset()
    failed: Dict[NodeId, str] = field(default_factory=dict)
    buffer: Dict[NodeId, Tuple[DataPacket, ...]] = field(default_factory=dict)

    @property
    def own_index(self) -> int:
        return len(self.carried)

    @property
    def active_routes(self) -> FrozenSet[RouteId]:
        return frozenset(c.route_id for c in self.connections.values())

    def connection_indices(self) -> Dict[NodeId, int]:
        """Last-heard indices of other nodes plus this node's exact one."""
        view = dict(self.index_table)
        view[self.me] = self.own_index
        return view

    def limit_of(self, node: NodeId) -> Optional[int]:
        if node in self.limits:
            return self.limits[node]
        return self.params.route_limit

    def clone(self) -> "NodeState":
        # shallow copy, then fresh containers; values inside are immutable
        s = copy.copy(self)
        s.routing_table = dict(self.routing_table)
        s.neighbors = dict(self.neighbors)
        s.index_table = dict(self.index_table)
        s.rreq_seen = dict(self.rreq_seen)
        s.pending = dict(self.pending)
        s.carried = dict(self.carried)
        s.connections = dict(self.connections)
        s.failed = dict(self.failed)
        s.buffer = dict(self.buffer)
        return s


def init_state(me: NodeId, params: NodeParams = NodeParams(), limits=None,
               ci: bool = True, own_seqno: int = 0) -> NodeState:
    return NodeState(me=me, params=params, ci=ci, limits=dict(limits or {}),
                     own_seqno=own_seqno)


# -- helpers (operate on a private clone) ------------------------------------

def _at(t: float) -> float:
    # deadlines sit on the same 1 us grid as the simulator clock
    return round(t, 3)


def _hello(s: NodeState) -> Broadcast:
    return Broadcast(HELLO(s.me, s.own_seqno, s.own_index))


def _remember_rreq(s: NodeState, key, now: float) -> None:
    seen = s.rreq_seen
    horizon = now - s.params.rreq_retention
    while seen:
        oldest = next(iter(seen))
        if seen[oldest] >= horizon:
            break
        del seen[oldest]
    seen[key] = now


def _seen_rreq(s: NodeState, key, now: float) -> bool:
    at = s.rreq_seen.get(key)
    return at is not None and at >= now - s.params.rreq_retention


def _update_route(s: NodeState, dest, next_hop, hops, seqno, now, lifetime=None) -> None:
    expires = _at(now + (s.params.active_route_timeout if lifetime is None else lifetime))
    cur = s.routing_table.get(dest)
    if (cur is None or not cur.usable(now) or seqno_newer(seqno, cur.dest_seqno)
            or (seqno == cur.dest_seqno and hops < cur.hop_count)):
        s.routing_table[dest] = RouteEntry(dest, next_hop, hops, seqno, expires)
    elif cur.next_hop == next_hop and seqno == cur.dest_seqno and cur.expires_at < expires:
        s.routing_table[dest] = replace(cur, expires_at=expires)


def _pin_route(s: NodeState, dest, next_hop, hops, expires) -> None:
    cur = s.routing_table.get(dest)
    seqno = cur.dest_seqno if cur is not None else 0
    if cur is not None and cur.next_hop == next_hop and cur.state is RouteState.VALID:
        expires = max(expires, cur.expires_at)
    s.routing_table[dest] = RouteEntry(dest, next_hop, hops, seqno, expires)


def _start_attempt(s: NodeState, acts: list, dest, now, attempt=1, excluded=frozenset(),
                   reason="new", rejected=False, started_at=None) -> None:
    s.own_seqno = seqno_inc(s.own_seqno)
    s.next_rreq_id += 1
    rreq_id = s.next_rreq_id
    _remember_rreq(s, (s.me, rreq_id), now)
    entry = s.routing_table.get(dest)
    known = entry.dest_seqno if entry is not None else None
    s.pending[dest] = PendingDiscovery(
        dest=dest, attempt=attempt, excluded=frozenset(excluded),
        started_at=now if started_at is None else started_at,
        rreq_id=rreq_id, reason=reason, rejected=rejected)
    acts.append(Discovery(dest, rreq_id, attempt, reason))
    acts.append(Broadcast(RREQ(s.me, rreq_id, dest, s.own_seqno, known, 0, frozenset(excluded))))
    acts.append(SetTimer(("rreq_timeout", dest, rreq_id), _at(now + s.params.rreq_retry_wait)))


def _fail(s: NodeState, acts: list, dest, reason: str) -> None:
    s.pending.pop(dest, None)
    s.failed[dest] = reason
    acts.append(ConnectionFailed(dest, reason))
    for pkt in s.buffer.pop(dest, ()):
        acts.append(DropData(pkt, reason))


def _retry_after_rejection(s, acts, dest, now, attempt, excluded, violators, started_at):
    excludable = frozenset(violators) - {s.me, dest}
    if not excludable or attempt >= s.params.rreq_retries + 1:
        _fail(s, acts, dest, "AdmissionRejected")
        return
    _start_attempt(s, acts, dest, now, attempt=attempt + 1, excluded=excluded | excludable,
                   reason="retry", rejected=True, started_at=started_at)


def _commit(s: NodeState, acts: list, route_id: RouteId, path, now,
            attempt=1, excluded=frozenset(), started_at=None, lifetime=None) -> None:
    path = tuple(path)
    dest = path[-1]
    expires = _at(now + (s.params.active_route_timeout if lifetime is None else lifetime))
    s.carried[route_id] = CarriedRoute(path, 0, expires)
    s.connections[dest] = Connection(route_id, attempt, frozenset(excluded),
                                     now if started_at is None else started_at)
    s.pending.pop(dest, None)
    acts.append(EstablishRoute(route_id, path))
    acts.append(IndexChanged(route_id, +1, s.own_index))
    acts.append(SetTimer(("route_expiry", route_id), expires))
    if len(path) > 1:
        _pin_route(s, dest, path[1], len(path) - 1, expires)
        acts.append(Unicast(path[1], ACT(route_id, path, expires)))
    acts.append(_hello(s))
    for pkt in s.buffer.pop(dest, ()):
        acts.append(ForwardData(path[1], replace(pkt, route_id=route_id)))


def _neighbor_on_path(c: CarriedRoute, toward: str):
    if toward == "src":
        return c.path[c.position - 1] if c.position > 0 else None
    return c.path[c.position + 1] if c.position < len(c.path) - 1 else None


def _invalidate_path_entries(s: NodeState, c: CarriedRoute) -> None:
    still_used = set()
    for other in s.carried.values():
        for toward, end in (("src", other.path[0]), ("dst", other.path[-1])):
            hop = _neighbor_on_path(other, toward)
            if hop is not None:
                still_used.add((end, hop))
    for toward, end in (("src", c.path[0]), ("dst", c.path[-1])):
        hop = _neighbor_on_path(c, toward)
        entry = s.routing_table.get(end)
        if (hop is not None and entry is not None and entry.next_hop == hop
                and entry.state is RouteState.VALID and (end, hop) not in still_used):
            s.routing_table[end] = replace(entry, state=RouteState.BROKEN)


def _release(s: NodeState, acts: list, route_id: RouteId, now, reason: str,
             notify=(), origin=None) -> None:
    c = s.carried.pop(route_id)
    acts.append(IndexChanged(route_id, -1, s.own_index))
    _invalidate_path_entries(s, c)
    for toward in notify:
        hop = _neighbor_on_path(c, toward)
        if hop is not None:
            acts.append(Unicast(hop, TEAR(route_id, toward, reason,
                                          s.me if origin is None else origin)))
    if route_id[0] != s.me:
        return
    dest = c.path[-1]
    conn = s.connections.get(dest)
    if conn is None or conn.route_id != route_id:
        return
    del s.connections[dest]
    acts.append(RouteEnded(route_id, reason))
    if dest not in s.wanted or dest in s.failed or dest in s.pending:
        return
    if reason == "refused" and origin is not None:
        acts.append(RejectRoute(dest, frozenset({origin})))
        _retry_after_rejection(s, acts, dest, now, conn.attempt, conn.excluded,
                               {origin}, conn.started_at)
    else:
        _start_attempt(s, acts, dest, now, reason="rediscover")


# -- route discovery ---------------------------------------------------------

def originate_discovery(state: NodeState, dest: NodeId, now: float, excluded=frozenset()):
    """Flood a fresh RREQ toward ``dest``."""
    if dest == state.me:
        raise ValueError("cannot discover a route to self")
    if dest in state.pending:
        raise AlreadyPending(dest)
    if dest in state.connections:
        return state, []
    s = state.clone()
    acts: list = []
    _start_attempt(s, acts, dest, now, excluded=frozenset(excluded),
                   reason="retry" if excluded else "new")
    return s, acts


def request_connection(state: NodeState, dest: NodeId, now: float):
    """Application asks for a connection to ``dest``; discovers on demand."""
    s = state.clone()
    s.wanted = state.wanted | {dest}
    acts: list = []
    if dest not in s.connections and dest not in s.pending and dest not in s.failed:
        _start_attempt(s, acts, dest, now)
    return s, acts


def _intermediate_reply(s: NodeState, rreq: RREQ, now: float) -> Optional[RREP]:
    entry = s.routing_table.get(rreq.dest)
    if entry is None or not entry.usable(now):
        return None
    if rreq.dest_seqno_known is not None and seqno_newer(rreq.dest_seqno_known, entry.dest_seqno):
        return None
    for c in s.carried.values():
        if c.path[-1] != rreq.dest:
            continue
        downstream = c.path[c.position + 1:]
        if rreq.excluded & set(downstream) or rreq.origin in downstream:
            continue
        indices = tuple((n, s.index_table.get(n, 0)) for n in reversed(downstream))
        return RREP(rreq.origin, rreq.rreq_id, rreq.dest, entry.dest_seqno, len(downstream),
                    max(0.0, c.expires_at - now), indices + ((s.me, s.own_index),))
    return None


def handle_rreq(state: NodeState, rreq: RREQ, frm: NodeId, now: float):
    key = (rreq.origin, rreq.rreq_id)
    if _seen_rreq(state, key, now) or state.me in rreq.excluded:
        return state, []
    s = state.clone()
    _remember_rreq(s, key, now)
    _update_route(s, rreq.origin, frm, rreq.hop_count + 1, rreq.origin_seqno, now)
    if s.me == rreq.dest:
        if rreq.dest_seqno_known is not None and seqno_newer(rreq.dest_seqno_known, s.own_seqno):
            s.own_seqno = rreq.dest_seqno_known
        reply = RREP(rreq.origin, rreq.rreq_id, s.me, s.own_seqno, 0,
                     s.params.active_route_timeout, ((s.me, s.own_index),))
        return s, [Unicast(frm, reply)]
    if s.params.intermediate_reply:
        reply = _intermediate_reply(s, rreq, now)
        if reply is not None:
            return s, [Unicast(frm, reply)]
    limit = s.limit_of(s.me)
    if s.ci and s.params.prune_at_limit and limit is not None and s.own_index >= limit:
        return s, []
    return s, [Broadcast(replace(rreq, hop_count=rreq.hop_count + 1))]


def handle_rrep(state: NodeState, rrep: RREP, frm: NodeId, now: float):
    crossed = [n for n, _ in rrep.path_indices]
    if state.me in crossed:
        return state, []
    if rrep.origin == state.me:
        p = state.pending.get(rrep.dest)
        if p is None or p.rreq_id != rrep.rreq_id:
            return state, []
        s = state.clone()
        _update_route(s, rrep.dest, frm, rrep.hop_count + 1, rrep.dest_seqno, now)
        acts: list = []
        if p.best_reply is None:
            s.pending[rrep.dest] = replace(p, best_reply=rrep, best_at=now)
            acts.append(SetTimer(("reply_window", rrep.dest, rrep.rreq_id),
                                 _at(now + s.params.reply_window)))
        elif (now, rrep.hop_count) < (p.best_at, p.best_reply.hop_count):
            s.pending[rrep.dest] = replace(p, best_reply=rrep, best_at=now)
        return s, acts

    back = state.routing_table.get(rrep.origin)
    if back is None or not back.usable(now):
        return state, []
    cur = state.routing_table.get(rrep.dest)
    if cur is not None and cur.usable(now) and seqno_newer(cur.dest_seqno, rrep.dest_seqno):
        return state, []  # stale reply
    s = state.clone()
    _update_route(s, rrep.dest, frm, rrep.hop_count + 1, rrep.dest_seqno, now)
    fwd = replace(rrep, hop_count=rrep.hop_count + 1,
                  path_indices=rrep.path_indices + ((s.me, s.own_index),))
    return s, [Unicast(back.next_hop, fwd)]


def close_reply_window(state: NodeState, dest: NodeId, rreq_id: int, now: float):
    """Run admission on the best collected reply and commit or reject it."""
    p = state.pending.get(dest)
    if p is None or p.rreq_id != rreq_id or p.best_reply is None:
        return state, []
    s = state.clone()
    acts: list = []
    path_indices = p.best_reply.path_indices + ((s.me, s.own_index),)
    path = tuple(n for n, _ in reversed(path_indices))
    if not path_is_simple(path):
        s.pending[dest] = replace(p, best_reply=None)
        return s, acts
    verdict = admission_check(path_indices, _limit_table(s, path)) if s.ci else ADMIT
    if isinstance(verdict, Reject):
        acts.append(RejectRoute(dest, verdict.violators))
        _retry_after_rejection(s, acts, dest, now, p.attempt, p.excluded,
                               verdict.violators, p.started_at)
        return s, acts
    acts.append(Admitted(dest, path_indices))
    s.next_route_serial += 1
    _commit(s, acts, (s.me, s.next_route_serial), path, now, attempt=p.attempt,
            excluded=p.excluded, started_at=p.started_at, lifetime=p.best_reply.lifetime)
    return s, acts


def _limit_table(s: NodeState, nodes) -> Dict[NodeId, Optional[int]]:
    return {n: s.limit_of(n) for n in nodes}


def discovery_timeout(state: NodeState, dest: NodeId, rreq_id: int, now: float):
    p = state.pending.get(dest)
    if p is None or p.rreq_id != rreq_id or p.best_reply is not None:
        return state, []
    s = state.clone()
    acts: list = []
    if p.attempt >= s.params.rreq_retries + 1:
        _fail(s, acts, dest, "AdmissionRejected" if p.rejected else "NoRoute")
    else:
        _start_attempt(s, acts, dest, now, attempt=p.attempt + 1, excluded=p.excluded,
                       reason="retry", rejected=p.rejected, started_at=p.started_at)
    return s, acts


# -- connection accounting ---------------------------------------------------

def commit_route(state: NodeState, route_id: RouteId, path, now: float):
    """Source side: take the admitted ``path`` into service as ``route_id``."""
    if not path or path[0] != state.me:
        raise ValueError("path must start at this node")
    s = state.clone()
    acts: list = []
    _commit(s, acts, route_id, path, now)
    return s, acts


def teardown_route(state: NodeState, route_id: RouteId, now: float, reason: str = "teardown"):
    """Release ``route_id`` here and walk a TEAR toward both path ends."""
    if route_id not in state.carried:
        raise UnknownRoute(route_id)
    s = state.clone()
    acts: list = []
    _release(s, acts, route_id, now, reason, notify=("src", "dst"))
    return s, acts


def handle_act(state: NodeState, act: ACT, frm: NodeId, now: float):
    if act.route_id in state.carried or state.me not in act.path or now >= act.expires_at:
        return state, []
    i = act.path.index(state.me)
    limit = state.limit_of(state.me)
    if state.ci and limit is not None and state.own_index >= limit:
        if i == 0:
            return state, []
        return state, [Unicast(act.path[i - 1], TEAR(act.route_id, "src", "refused", state.me))]
    s = state.clone()
    s.carried[act.route_id] = CarriedRoute(act.path, i, act.expires_at)
    acts: list = [IndexChanged(act.route_id, +1, s.own_index),
                  SetTimer(("route_expiry", act.route_id), act.expires_at)]
    last = len(act.path) - 1
    if i > 0:
        _pin_route(s, act.path[0], act.path[i - 1], i, act.expires_at)
    if i < last:
        _pin_route(s, act.path[-1], act.path[i + 1], last - i, act.expires_at)
    acts.append(_hello(s))
    if i < last:
        acts.append(Unicast(act.path[i + 1], act))
    return s, acts


def handle_tear(state: NodeState, tear: TEAR, frm: NodeId, now: float):
    if tear.route_id not in state.carried:
        return state, []
    s = state.clone()
    acts: list = []
    _release(s, acts, tear.route_id, now, tear.reason, notify=(tear.toward,),
             origin=tear.origin)
    return s, acts


def route_expired(state: NodeState, route_id: RouteId, now: float):
    c = state.carried.get(route_id)
    if c is None or now < c.expires_at:
        return state, []
    s = state.clone()
    acts: list = []
    _release(s, acts, route_id, now, "expired")
    return s, acts


# -- neighbor sensing and maintenance ----------------------------------------

def emit_hello(state: NodeState, now: float):
    s = state.clone()
    s.last_hello_at = now
    return s, [_hello(s), SetTimer(("hello",), _at(now + s.params.hello_interval))]


def handle_hello(state: NodeState, hello: HELLO, now: float) -> NodeState:
    s = state.clone()
    s.neighbors[hello.sender] = now
    s.index_table[hello.sender] = hello.connection_index
    _update_route(s, hello.sender, hello.sender, 1, hello.sender_seqno, now,
                  lifetime=s.params.allowed_hello_loss * s.params.hello_interval)
    return s


def check_neighbor_liveness(state: NodeState, now: float):
    horizon = state.params.allowed_hello_loss * state.params.hello_interval
    lost = {n for n, t in state.neighbors.items() if now - t > horizon}
    if not lost:
        return state, []
    s = state.clone()
    acts: list = []
    for n in lost:
        del s.neighbors[n]
    unreachable = []
    for dest in sorted(s.routing_table):
        e = s.routing_table[dest]
        if e.next_hop in lost and e.usable(now):
            e = replace(e, state=RouteState.BROKEN, dest_seqno=seqno_inc(e.dest_seqno))
            s.routing_table[dest] = e
            unreachable.append((dest, e.dest_seqno))
    if unreachable:
        acts.append(Broadcast(RERR(tuple(unreachable))))
    for route_id in sorted(s.carried):
        c = s.carried[route_id]
        notify = []
        hit = False
        for toward in ("src", "dst"):
            hop = _neighbor_on_path(c, toward)
            if hop is None:
                continue
            if hop in lost:
                hit = True
            else:
                notify.append(toward)
        if hit:
            _release(s, acts, route_id, now, "broken", notify=tuple(notify))
    return s, acts


def handle_rerr(state: NodeState, rerr: RERR, frm: NodeId, now: float):
    s = None
    acts: list = []
    invalidated = []
    for dest, seqno in rerr.unreachable:
        e = state.routing_table.get(dest)
        if (e is not None and e.state is RouteState.VALID and e.next_hop == frm
                and not seqno_newer(e.dest_seqno, seqno)):
            s = s or state.clone()
            s.routing_table[dest] = replace(e, state=RouteState.BROKEN, dest_seqno=seqno)
            invalidated.append((dest, seqno))
    for dest, _ in rerr.unreachable:
        conn = state.connections.get(dest)
        if conn is None:
            continue
        c = state.carried.get(conn.route_id)
        if c is not None and len(c.path) > 1 and c.path[1] == frm:
            s = s or state.clone()
            if conn.route_id in s.carried:
                _release(s, acts, conn.route_id, now, "broken", notify=("dst",))
    if invalidated:
        acts.insert(0, Broadcast(RERR(tuple(invalidated))))
    return (s or state), acts


# -- data plane --------------------------------------------------------------

def send_data(state: NodeState, packet: DataPacket, now: float):
    """Source hands a freshly generated packet to the routing layer."""
    dest = packet.dst
    if dest in state.failed:
        return state, [DropData(packet, state.failed[dest])]
    conn = state.connections.get(dest)
    if conn is not None:
        c = state.carried[conn.route_id]
        return state, [ForwardData(c.path[1], replace(packet, route_id=conn.route_id))]
    queued = state.buffer.get(dest, ())
    if len(queued) >= state.params.buffer_max:
        return state, [DropData(packet, "BufferFull")]
    s = state.clone()
    s.buffer[dest] = queued + (packet,)
    acts: list = []
    if dest not in s.pending:
        s.wanted = s.wanted | {dest}
        _start_attempt(s, acts, dest, now)
    return s, acts


def handle_data(state: NodeState, packet: DataPacket, frm: NodeId, now: float):
    if packet.dst == state.me:
        return state, [DeliverData(packet)]
    c = state.carried.get(packet.route_id)
    if c is not None and c.position < len(c.path) - 1:
        return state, [ForwardData(c.path[c.position + 1], packet)]
    acts: list = [DropData(packet, "NoRoute")]
    if packet.route_id is not None:
        acts.append(Unicast(frm, TEAR(packet.route_id, "src", "no_route", state.me)))
    return state, acts


# -- dispatch ----------------------------------------------------------------

def handle_timer(state: NodeState, kind: tuple, now: float):
    tag = kind[0]
    if tag == "hello":
        state, acts = check_neighbor_liveness(state, now)
        state, more = emit_hello(state, now)
        return state, acts + more
    if tag == "rreq_timeout":
        return discovery_timeout(state, kind[1], kind[2], now)
    if tag == "reply_window":
        return close_reply_window(state, kind[1], kind[2], now)
    if tag == "route_expiry":
        return route_expired(state, kind[1], now)
    raise ValueError(f"unknown timer {kind!r}")


_HANDLERS = {
    "RREQ": handle_rreq,
    "RREP": handle_rrep,
    "RERR": handle_rerr,
    "ACT": handle_act,
    "TEAR": handle_tear,
}


def receive(state: NodeState, msg, frm: NodeId, now: float):
    """Entry point for anything arriving over the air."""
    if msg.kind == "DATA":
        return handle_data(state, msg, frm, now)
    if msg.kind == "HELLO":
        return handle_hello(state, msg, now), []
    if state.neighbors.get(frm) != now:
        state = replace(state, neighbors={**state.neighbors, frm: now})
    return _HANDLERS[msg.kind](state, msg, frm, now)
