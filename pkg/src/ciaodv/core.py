"""Identifiers, sequence numbers, routing-table rows and control messages.

Everything here is an immutable value. Node ids are small integers (the
index of the node in its scenario); labels such as ``"S"`` or ``"N2"`` live in
the scenario and only matter for display and file formats.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple, Union

NodeId = int
RouteId = Tuple[int, int]  # (originating source, per-source serial)

SEQNO_MOD = 1 << 32
_HALF = 1 << 31


def seqno_inc(value: int, by: int = 1) -> int:
    return (value + by) % SEQNO_MOD


def seqno_newer(a: int, b: int) -> bool:
    """True iff sequence number ``a`` is strictly fresher than ``b``.

    Uses the signed difference of the two 32-bit values, so the order stays
    total for any set of numbers spanning less than half the counter space.
    """
    diff = (a - b) % SEQNO_MOD
    return diff != 0 and diff < _HALF


def path_is_simple(path) -> bool:
    if not path:
        raise ValueError("path must be non-empty")
    return len(set(path)) == len(path)


class RouteState(enum.Enum):
    VALID = "valid"
    BROKEN = "broken"


@dataclass(frozen=True)
class RouteEntry:
    destination: NodeId
    next_hop: NodeId
    hop_count: int
    dest_seqno: int
    expires_at: float
    state: RouteState = RouteState.VALID

    def usable(self, now: float) -> bool:
        return self.state is RouteState.VALID and now < self.expires_at


# -- control messages --------------------------------------------------------

@dataclass(frozen=True)
class RREQ:
    origin: NodeId
    rreq_id: int
    dest: NodeId
    origin_seqno: int
    dest_seqno_known: Optional[int]
    hop_count: int
    excluded: frozenset = frozenset()

    kind = "RREQ"


@dataclass(frozen=True)
class RREP:
    origin: NodeId  # the node that asked for the route
    rreq_id: int
    dest: NodeId
    dest_seqno: int
    hop_count: int
    lifetime: float
    # (node, connection index) for every node the reply has crossed,
    # in reverse-path order (destination first)
    path_indices: Tuple[Tuple[NodeId, int], ...] = ()

    kind = "RREP"


@dataclass(frozen=True)
class RERR:
    unreachable: Tuple[Tuple[NodeId, int], ...]

    kind = "RERR"


@dataclass(frozen=True)
class HELLO:
    sender: NodeId
    sender_seqno: int
    connection_index: int

    kind = "HELLO"


@dataclass(frozen=True)
class ACT:
    """Route activation, carried hop by hop along a freshly admitted path."""

    route_id: RouteId
    path: Tuple[NodeId, ...]
    expires_at: float

    kind = "ACT"


@dataclass(frozen=True)
class TEAR:
    """Route release, walked along the path toward one end."""

    route_id: RouteId
    toward: str  # "src" or "dst"
    reason: str
    origin: NodeId

    kind = "TEAR"


@dataclass(frozen=True)
class DataPacket:
    flow: int
    seq: int
    src: NodeId
    dst: NodeId
    created_at: float
    route_id: Optional[RouteId] = None

    kind = "DATA"


ControlMessage = Union[RREQ, RREP, RERR, HELLO, ACT, TEAR]
CONTROL_KINDS = ("RREQ", "RREP", "RERR", "HELLO", "ACT", "TEAR")


# -- trace field encoding ----------------------------------------------------

class MalformedMessage(ValueError):
    pass


def fmt_time(t: float) -> str:
    return f"{t:.3f}"


def _ids(values: Iterable[int]) -> str:
    text = ",".join(str(v) for v in values)
    return text or "-"


def _parse_ids(text: str) -> Tuple[int, ...]:
    if text == "-":
        return ()
    return tuple(int(v) for v in text.split(","))


def _pairs(pairs) -> str:
    return ",".join(f"{a}:{b}" for a, b in pairs) or "-"


def _parse_pairs(text: str) -> Tuple[Tuple[int, int], ...]:
    if text == "-":
        return ()
    out = []
    for item in text.split(","):
        a, b = item.split(":")
        out.append((int(a), int(b)))
    return tuple(out)


def fmt_route_id(route_id: Optional[RouteId]) -> str:
    if route_id is None:
        return "-"
    return f"{route_id[0]}.{route_id[1]}"


def parse_route_id(text: str) -> Optional[RouteId]:
    if text == "-":
        return None
    a, b = text.split(".")
    return (int(a), int(b))


def message_fields(msg) -> list:
    """Fixed-order string fields for one message (trace line payload)."""
    if isinstance(msg, RREQ):
        known = "-" if msg.dest_seqno_known is None else str(msg.dest_seqno_known)
        return [str(msg.origin), str(msg.rreq_id), str(msg.dest), str(msg.origin_seqno),
                known, str(msg.hop_count), _ids(sorted(msg.excluded))]
    if isinstance(msg, RREP):
        return [str(msg.origin), str(msg.rreq_id), str(msg.dest), str(msg.dest_seqno),
                str(msg.hop_count), fmt_time(msg.lifetime), _pairs(msg.path_indices)]
    if isinstance(msg, RERR):
        return [_pairs(msg.unreachable)]
    if isinstance(msg, HELLO):
        return [str(msg.sender), str(msg.sender_seqno), str(msg.connection_index)]
    if isinstance(msg, ACT):
        return [fmt_route_id(msg.route_id), _ids(msg.path), fmt_time(msg.expires_at)]
    if isinstance(msg, TEAR):
        return [fmt_route_id(msg.route_id), msg.toward, msg.reason, str(msg.origin)]
    if isinstance(msg, DataPacket):
        return [str(msg.flow), str(msg.seq), str(msg.src), str(msg.dst),
                fmt_time(msg.created_at), fmt_route_id(msg.route_id)]
    raise TypeError(f"not a message: {msg!r}")


def parse_message(kind: str, fields):
    """Inverse of :func:`message_fields`."""
    f = list(fields)
    try:
        if kind == "RREQ":
            known = None if f[4] == "-" else int(f[4])
            return RREQ(int(f[0]), int(f[1]), int(f[2]), int(f[3]), known, int(f[5]),
                        frozenset(_parse_ids(f[6])))
        if kind == "RREP":
            return RREP(int(f[0]), int(f[1]), int(f[2]), int(f[3]), int(f[4]),
                        float(f[5]), _parse_pairs(f[6]))
        if kind == "RERR":
            return RERR(_parse_pairs(f[0]))
        if kind == "HELLO":
            return HELLO(int(f[0]), int(f[1]), int(f[2]))
        if kind == "ACT":
            return ACT(parse_route_id(f[0]), _parse_ids(f[1]), float(f[2]))
        if kind == "TEAR":
            return TEAR(parse_route_id(f[0]), f[1], f[2], int(f[3]))
        if kind == "DATA":
            return DataPacket(int(f[0]), int(f[1]), int(f[2]), int(f[3]), float(f[4]),
                              parse_route_id(f[5]))
    except (IndexError, ValueError) as exc:
        raise MalformedMessage(f"bad {kind} fields {f!r}: {exc}") from None
    raise MalformedMessage(f"unknown message kind {kind!r}")
