"""Scenario description, the ``.scn`` text format, fixtures and generators.

The file format is sectioned and line oriented; see
``docs/scenario-format.md`` for the grammar. ``parse_scenario(render_scenario(s))``
returns ``s`` for every valid scenario.
"""
from __future__ import annotations

import hashlib
import math
import random
from collections import Counter, deque
from dataclasses import dataclass, replace
from typing import Optional, Tuple

from .node import NodeParams

PROTOCOLS = ("baseline", "ci")


class ScenarioError(Exception):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ScenarioSyntaxError(ScenarioError):
    pass


class UnknownNode(ScenarioError):
    def __init__(self, label: str, line: Optional[int] = None):
        self.label = label
        super().__init__(f"unknown node {label!r}", line)


class DuplicateLabel(ScenarioError):
    def __init__(self, label: str, line: Optional[int] = None):
        self.label = label
        super().__init__(f"duplicate node label {label!r}", line)


class BadParameter(ScenarioError):
    pass


class UnknownScenario(ScenarioError):
    pass


class GenerationFailed(ScenarioError):
    pass


class ScenarioErrors(ScenarioError):
    """Raised by the parser; ``errors`` holds every located problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


@dataclass(frozen=True)
class NodeSpec:
    label: str
    x: float
    y: float
    params: NodeParams = NodeParams()
    capacity_pps: Optional[float] = None  # None: forwarding is not rate limited
    queue_len_max: int = 50


@dataclass(frozen=True)
class MediumSpec:
    range: float = 100.0
    per_hop_latency: float = 5.0
    loss_rate: float = 0.0


@dataclass(frozen=True)
class MobilitySpec:
    model: str = "static"  # "static" or "random_waypoint"
    speed_min: float = 0.0  # m/s
    speed_max: float = 0.0
    pause_ms: float = 0.0
    width: float = 0.0
    height: float = 0.0
    step_ms: float = 100.0
    departures: Tuple[Tuple[str, float], ...] = ()


@dataclass(frozen=True)
class Flow:
    src: str
    dst: str
    start_at: float
    rate_pps: float
    payload: int = 512


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    nodes: Tuple[NodeSpec, ...]
    flows: Tuple[Flow, ...] = ()
    medium: MediumSpec = MediumSpec()
    mobility: MobilitySpec = MobilitySpec()
    duration: float = 10000.0
    seed: int = 1
    protocol: str = "ci"
    traffic_jitter: float = 0.0
    index_table: Tuple[Tuple[str, int], ...] = ()

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(n.label for n in self.nodes)

    def node_id(self, label: str) -> int:
        for i, n in enumerate(self.nodes):
            if n.label == label:
                return i
        raise UnknownNode(label)

    def node(self, label: str) -> NodeSpec:
        return self.nodes[self.node_id(label)]

    def scenario_hash(self) -> str:
        """Digest of everything except the protocol choice."""
        text = render_scenario(replace(self, protocol="ci"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def with_route_limit(self, limit: Optional[int]) -> "ScenarioSpec":
        nodes = tuple(replace(n, params=replace(n.params, route_limit=limit)) for n in self.nodes)
        return replace(self, nodes=nodes)

    def validate(self) -> None:
        seen = set()
        for n in self.nodes:
            if n.label in seen:
                raise DuplicateLabel(n.label)
            seen.add(n.label)
        for f in self.flows:
            for end in (f.src, f.dst):
                if end not in seen:
                    raise UnknownNode(end)
            if f.src == f.dst:
                raise BadParameter(f"flow {f.src}->{f.dst} has src == dst")
            if not f.rate_pps > 0:
                raise BadParameter(f"flow {f.src}->{f.dst} needs rate_pps > 0")
        if self.protocol not in PROTOCOLS:
            raise BadParameter(f"protocol must be one of {PROTOCOLS}")
        for label, _ in self.mobility.departures:
            if label not in seen:
                raise UnknownNode(label)
        for label, _ in self.index_table:
            if label not in seen:
                raise UnknownNode(label)


# -- value codecs --------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return "unlimited"
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value)


def _opt_int(text: str) -> Optional[int]:
    if text == "unlimited":
        return None
    value = int(text)
    if value < 1:
        raise ValueError("must be >= 1 or 'unlimited'")
    return value


def _opt_float(text: str) -> Optional[float]:
    if text == "unlimited":
        return None
    value = float(text)
    if not value > 0:
        raise ValueError("must be > 0 or 'unlimited'")
    return value


def _bool(text: str) -> bool:
    if text not in ("true", "false"):
        raise ValueError("expected true or false")
    return text == "true"


def _nonneg(conv):
    def parse(text):
        value = conv(text)
        if value < 0:
            raise ValueError("must be non-negative")
        return value
    return parse


def _prob(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise ValueError("must lie in [0, 1]")
    return value


# file key -> (NodeParams field, parser)
_PARAM_KEYS = {
    "route_limit": ("route_limit", _opt_int),
    "hello_interval_ms": ("hello_interval", _opt_float),
    "allowed_hello_loss": ("allowed_hello_loss", _nonneg(int)),
    "active_route_timeout_ms": ("active_route_timeout", _opt_float),
    "rreq_retries": ("rreq_retries", _nonneg(int)),
    "rreq_retry_wait_ms": ("rreq_retry_wait", _opt_float),
    "reply_window_ms": ("reply_window", _nonneg(float)),
    "buffer_max": ("buffer_max", _nonneg(int)),
    "rreq_retention_ms": ("rreq_retention", _nonneg(float)),
    "intermediate_reply": ("intermediate_reply", _bool),
    "prune_at_limit": ("prune_at_limit", _bool),
}
_NODE_KEYS = {
    "capacity_pps": ("capacity_pps", _opt_float),
    "queue_len_max": ("queue_len_max", _nonneg(int)),
}
_MEDIUM_KEYS = {
    "range": ("range", _nonneg(float)),
    "per_hop_latency_ms": ("per_hop_latency", _nonneg(float)),
    "loss_rate": ("loss_rate", _prob),
}
_MOBILITY_KEYS = {
    "model": ("model", str),
    "speed_min": ("speed_min", _nonneg(float)),
    "speed_max": ("speed_max", _nonneg(float)),
    "pause_ms": ("pause_ms", _nonneg(float)),
    "width": ("width", _nonneg(float)),
    "height": ("height", _nonneg(float)),
    "step_ms": ("step_ms", _opt_float),
}
_SCENARIO_KEYS = {
    "name": ("name", str),
    "protocol": ("protocol", str),
    "seed": ("seed", int),
    "duration_ms": ("duration", _nonneg(float)),
    "traffic_jitter": ("traffic_jitter", _prob),
}
_SECTIONS = ("scenario", "medium", "params", "nodes", "mobility", "flows", "indices")
_REQUIRED = ("scenario", "nodes", "flows")


def _node_value(node: NodeSpec, key: str):
    if key in _PARAM_KEYS:
        return getattr(node.params, _PARAM_KEYS[key][0])
    return getattr(node, _NODE_KEYS[key][0])


# -- render ------------------------------------------------------------------

def render_scenario(spec: ScenarioSpec) -> str:
    out = ["# ciaodv scenario v1", "[scenario]"]
    for key, (attr, _) in _SCENARIO_KEYS.items():
        value = getattr(spec, attr)
        out.append(f"{key} {value if isinstance(value, str) else _fmt(value)}")
    out += ["", "[medium]"]
    for key, (attr, _) in _MEDIUM_KEYS.items():
        out.append(f"{key} {_fmt(getattr(spec.medium, attr))}")

    node_keys = list(_PARAM_KEYS) + list(_NODE_KEYS)
    defaults = {}
    for key in node_keys:
        values = [_node_value(n, key) for n in spec.nodes]
        if values:
            defaults[key] = Counter(values).most_common(1)[0][0]
        else:
            defaults[key] = _node_value(NodeSpec("-", 0.0, 0.0), key)
    out += ["", "[params]"]
    out += [f"{key} {_fmt(defaults[key])}" for key in node_keys]

    out += ["", "[nodes]", "# label x y [key=value ...]"]
    for n in spec.nodes:
        extra = [f"{key}={_fmt(_node_value(n, key))}" for key in node_keys
                 if _node_value(n, key) != defaults[key]]
        out.append(" ".join([n.label, _fmt(n.x), _fmt(n.y)] + extra))

    out += ["", "[mobility]"]
    for key, (attr, _) in _MOBILITY_KEYS.items():
        value = getattr(spec.mobility, attr)
        out.append(f"{key} {value if isinstance(value, str) else _fmt(value)}")
    for label, at in spec.mobility.departures:
        out.append(f"depart {label} {_fmt(at)}")

    out += ["", "[flows]", "# src dst start_ms rate_pps [payload=bytes]"]
    for f in spec.flows:
        out.append(f"{f.src} {f.dst} {_fmt(f.start_at)} {_fmt(f.rate_pps)} payload={f.payload}")

    if spec.index_table:
        out += ["", "[indices]"]
        out += [f"{label} {value}" for label, value in spec.index_table]
    return "\n".join(out) + "\n"


# -- parse -------------------------------------------------------------------

def parse_scenario(text: str) -> ScenarioSpec:
    errors = []
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or line[1:-1] not in _SECTIONS:
                errors.append(ScenarioSyntaxError(f"unknown section header {line!r}", lineno))
                current = None
                continue
            current = line[1:-1]
            if current in sections:
                errors.append(ScenarioSyntaxError(f"section [{current}] repeated", lineno))
            sections.setdefault(current, [])
            continue
        if current is None:
            errors.append(ScenarioSyntaxError("content outside of a section", lineno))
            continue
        sections[current].append((lineno, line.split()))
    missing = [s for s in _REQUIRED if s not in sections]
    if missing:
        errors.append(ScenarioSyntaxError(
            "missing sections: " + ", ".join(f"[{s}]" for s in missing),
            len(text.splitlines()) + 1))
        raise ScenarioErrors(errors)

    def keyed(name, table, target):
        values = {}
        for lineno, toks in sections.get(name, []):
            if name == "mobility" and toks[0] == "depart":
                continue
            if len(toks) != 2:
                errors.append(ScenarioSyntaxError(f"expected 'key value' in [{name}]", lineno))
                continue
            key, text_value = toks
            if key not in table:
                errors.append(BadParameter(f"unknown key {key!r} in [{name}]", lineno))
                continue
            attr, conv = table[key]
            try:
                values[attr] = conv(text_value)
            except ValueError as exc:
                errors.append(BadParameter(f"{key}: {exc}", lineno))
        try:
            return replace(target, **values)
        except (TypeError, ValueError) as exc:
            errors.append(BadParameter(str(exc), sections.get(name, [(None,)])[0][0]))
            return target

    head = keyed("scenario", _SCENARIO_KEYS,
                 ScenarioSpec(name="unnamed", nodes=()))
    medium = keyed("medium", _MEDIUM_KEYS, MediumSpec())

    base = NodeSpec("-", 0.0, 0.0)
    param_defaults = {}
    node_defaults = {}
    for lineno, toks in sections.get("params", []):
        if len(toks) != 2:
            errors.append(ScenarioSyntaxError("expected 'key value' in [params]", lineno))
            continue
        key, text_value = toks
        table = _PARAM_KEYS if key in _PARAM_KEYS else _NODE_KEYS if key in _NODE_KEYS else None
        if table is None:
            errors.append(BadParameter(f"unknown key {key!r} in [params]", lineno))
            continue
        attr, conv = table[key]
        try:
            (param_defaults if table is _PARAM_KEYS else node_defaults)[attr] = conv(text_value)
        except ValueError as exc:
            errors.append(BadParameter(f"{key}: {exc}", lineno))

    nodes = []
    labels = set()
    for lineno, toks in sections["nodes"]:
        if len(toks) < 3:
            errors.append(ScenarioSyntaxError("expected 'label x y [key=value ...]'", lineno))
            continue
        label = toks[0]
        if label in labels:
            errors.append(DuplicateLabel(label, lineno))
            continue
        labels.add(label)
        try:
            x, y = float(toks[1]), float(toks[2])
        except ValueError:
            errors.append(BadParameter(f"bad coordinates for {label}", lineno))
            continue
        pvals = dict(param_defaults)
        nvals = dict(node_defaults)
        for tok in toks[3:]:
            key, sep, text_value = tok.partition("=")
            table = _PARAM_KEYS if key in _PARAM_KEYS else _NODE_KEYS if key in _NODE_KEYS else None
            if not sep or table is None:
                errors.append(BadParameter(f"bad node option {tok!r}", lineno))
                continue
            attr, conv = table[key]
            try:
                (pvals if table is _PARAM_KEYS else nvals)[attr] = conv(text_value)
            except ValueError as exc:
                errors.append(BadParameter(f"{key}: {exc}", lineno))
        try:
            params = NodeParams(**pvals)
        except ValueError as exc:
            errors.append(BadParameter(str(exc), lineno))
            continue
        nodes.append(replace(base, label=label, x=x, y=y, params=params, **nvals))

    mobility = keyed("mobility", _MOBILITY_KEYS, MobilitySpec())
    if mobility.model not in ("static", "random_waypoint"):
        errors.append(BadParameter(f"unknown mobility model {mobility.model!r}"))
    departures = []
    for lineno, toks in sections.get("mobility", []):
        if toks[0] != "depart":
            continue
        if len(toks) != 3:
            errors.append(ScenarioSyntaxError("expected 'depart label at_ms'", lineno))
            continue
        if toks[1] not in labels:
            errors.append(UnknownNode(toks[1], lineno))
            continue
        try:
            departures.append((toks[1], _nonneg(float)(toks[2])))
        except ValueError as exc:
            errors.append(BadParameter(f"depart: {exc}", lineno))
    mobility = replace(mobility, departures=tuple(departures))

    flows = []
    for lineno, toks in sections["flows"]:
        if len(toks) not in (4, 5):
            errors.append(ScenarioSyntaxError(
                "expected 'src dst start_ms rate_pps [payload=bytes]'", lineno))
            continue
        src, dst = toks[0], toks[1]
        bad = [lab for lab in (src, dst) if lab not in labels]
        for lab in bad:
            errors.append(UnknownNode(lab, lineno))
        if bad:
            continue
        if src == dst:
            errors.append(BadParameter("flow source equals destination", lineno))
            continue
        try:
            start = _nonneg(float)(toks[2])
            rate = _opt_float(toks[3])
            payload = 512
            if len(toks) == 5:
                key, _, value = toks[4].partition("=")
                if key != "payload":
                    raise ValueError(f"unknown flow option {key!r}")
                payload = _nonneg(int)(value)
            if rate is None:
                raise ValueError("rate must be finite")
        except ValueError as exc:
            errors.append(BadParameter(f"flow: {exc}", lineno))
            continue
        flows.append(Flow(src, dst, start, rate, payload))

    indices = []
    for lineno, toks in sections.get("indices", []):
        if len(toks) != 2:
            errors.append(ScenarioSyntaxError("expected 'label index'", lineno))
            continue
        if toks[0] not in labels:
            errors.append(UnknownNode(toks[0], lineno))
            continue
        try:
            indices.append((toks[0], _nonneg(int)(toks[1])))
        except ValueError as exc:
            errors.append(BadParameter(f"index: {exc}", lineno))

    if head.protocol not in PROTOCOLS:
        errors.append(BadParameter(f"protocol must be one of {PROTOCOLS}"))
    if errors:
        raise ScenarioErrors(errors)
    return replace(head, nodes=tuple(nodes), medium=medium, mobility=mobility,
                   flows=tuple(flows), index_table=tuple(indices))


def load_scenario(path) -> ScenarioSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


# -- built-in fixtures ---------------------------------------------------------

def _nodes(coords, params=NodeParams(), **overrides):
    out = []
    for label, (x, y) in coords.items():
        node = NodeSpec(label, float(x), float(y), params)
        if label in overrides:
            node = replace(node, **overrides[label])
        out.append(node)
    return tuple(out)


FIG1_COORDS = {"S": (0, 0), "N1": (90, 0), "N2": (180, 0), "N3": (270, 0), "D": (360, 0)}

FIG2_COORDS = {
    "S": (0, 0), "N1": (-15, 80), "N2": (40, 135), "N3": (110, 165),
    "N4": (85, 0), "N5": (145, 35), "N6": (110, -75), "N7": (175, -100),
    "D1": (165, 115), "D2": (240, -140),
}

# N2 is the hub: three arms (up to D1, right to D2, down to D3), S hangs off
# its left with N1 as a dead end, N10 a dead end off N9.
FIG3_COORDS = {
    "S": (-90, 0), "N1": (-180, 0), "N2": (0, 0),
    "N3": (0, 90), "N4": (0, 180), "D1": (0, 270),
    "N5": (90, 0), "N6": (180, 0), "N7": (270, 0), "D2": (360, 0),
    "N8": (0, -90), "N9": (0, -180), "D3": (0, -270), "N10": (-90, -180),
}

TABLE1_INDICES = (
    ("S", 1), ("N1", 0), ("N2", 2), ("N3", 1), ("N4", 1), ("N5", 1), ("N6", 1),
    ("N7", 1), ("N8", 1), ("N9", 1), ("N10", 0), ("D1", 1), ("D2", 1), ("D3", 0),
)


def _fig1():
    return ScenarioSpec(
        name="fig1", nodes=_nodes(FIG1_COORDS, NodeParams(route_limit=2)),
        flows=(Flow("S", "D", 1500.0, 10.0),), duration=5000.0)


def _fig2(depart=False):
    mobility = MobilitySpec(departures=(("N5", 3000.0),)) if depart else MobilitySpec()
    return ScenarioSpec(
        name="fig2_break" if depart else "fig2",
        nodes=_nodes(FIG2_COORDS, NodeParams(route_limit=2)),
        flows=(Flow("S", "D1", 1500.0, 10.0), Flow("S", "D2", 1600.0, 10.0)),
        mobility=mobility, duration=10000.0 if depart else 6000.0)


def _fig3():
    # S originates both existing connections, so it already counts 2; a limit
    # of 3 at S leaves it the headroom the table1 vector shows (S below its limit).
    return ScenarioSpec(
        name="fig3",
        nodes=_nodes(FIG3_COORDS, NodeParams(route_limit=2),
                     S={"params": NodeParams(route_limit=3)}),
        flows=(Flow("S", "D1", 1500.0, 5.0), Flow("S", "D2", 2000.0, 5.0),
               Flow("S", "D3", 3000.0, 5.0)),
        duration=8000.0)


def _table1():
    return replace(_fig3(), name="table1", duration=3000.0, index_table=TABLE1_INDICES)


def star_relay(k: int = 4, rate_pps: float = 20.0, relay_flows: float = 2.0,
               route_limit: int = 2, duration: float = 20000.0,
               queue_len_max: int = 10) -> ScenarioSpec:
    """K sources, one relay, K sinks; the relay forwards ``relay_flows`` flows' worth."""
    params = NodeParams(route_limit=route_limit, active_route_timeout=60000.0)
    nodes = [NodeSpec("R", 0.0, 0.0, params, capacity_pps=relay_flows * rate_pps,
                      queue_len_max=queue_len_max)]
    spread = 60.0
    for side, centre in (("s", 180.0), ("t", 0.0)):
        for i in range(k):
            angle = centre if k == 1 else centre - spread / 2 + spread * i / (k - 1)
            rad = math.radians(angle)
            nodes.append(NodeSpec(f"{side}{i + 1}", round(80 * math.cos(rad), 3),
                                  round(80 * math.sin(rad), 3), params))
    flows = tuple(Flow(f"s{i + 1}", f"t{i + 1}", 1000.0 + 200.0 * i, rate_pps)
                  for i in range(k))
    return ScenarioSpec(name="star_relay", nodes=tuple(nodes), flows=flows,
                        duration=duration, traffic_jitter=0.5)


_BUILTINS = {
    "fig1": _fig1,
    "fig2": _fig2,
    "fig2_break": lambda: _fig2(depart=True),
    "fig3": _fig3,
    "table1": _table1,
    "star_relay": star_relay,
}

BUILTIN_NAMES = tuple(_BUILTINS)


def builtin(name: str) -> ScenarioSpec:
    try:
        make = _BUILTINS[name]
    except KeyError:
        raise UnknownScenario(f"unknown built-in scenario {name!r}") from None
    spec = make()
    spec.validate()
    return spec


# -- random generation ---------------------------------------------------------

@dataclass(frozen=True)
class GenParams:
    nodes: Tuple[int, int] = (30, 30)  # inclusive range for the node count
    flows: Tuple[int, int] = (10, 10)
    expected_degree: float = 6.0
    radio_range: float = 100.0
    per_hop_latency: float = 5.0
    loss_rate: float = 0.0
    mobility: bool = True
    speed: Tuple[float, float] = (1.0, 10.0)
    pause_ms: float = 1000.0
    duration: float = 15000.0
    rate_pps: Tuple[float, float] = (1.0, 4.0)
    route_limits: Tuple[Optional[int], ...] = (1, 2, 3, None)
    protocol: str = "ci"
    max_tries: int = 200


def unit_disk_connected(points, radio_range: float) -> bool:
    if not points:
        return True
    r2 = radio_range * radio_range
    seen = {0}
    todo = deque([0])
    while todo:
        i = todo.popleft()
        xi, yi = points[i]
        for j, (xj, yj) in enumerate(points):
            if j not in seen and (xi - xj) ** 2 + (yi - yj) ** 2 <= r2:
                seen.add(j)
                todo.append(j)
    return len(seen) == len(points)


def link_probability(side: float, radio_range: float) -> float:
    """P(two uniform points in a square of ``side`` lie within ``radio_range``)."""
    d = radio_range / side
    if d >= math.sqrt(2):
        return 1.0
    if d <= 1:
        return math.pi * d * d - 8 * d ** 3 / 3 + d ** 4 / 2
    # range longer than the side: integrate numerically over the remaining corner
    steps = 2000
    total = 0.0
    for k in range(steps):
        x = (k + 0.5) / steps
        y = min(1.0, math.sqrt(max(0.0, d * d - x * x)))
        total += 2 * (1 - x) * (2 * y - y * y)
    return min(1.0, total / steps)


def area_side(n: int, radio_range: float, expected_degree: float) -> float:
    """Square side where a node's mean neighbour count is ``expected_degree``.

    Border effects are included, so the degree is the one actually realized
    by uniform placement, not the infinite-plane approximation.
    """
    if n < 2:
        return radio_range
    target = min(expected_degree / (n - 1), 1.0)
    lo, hi = radio_range / math.sqrt(2), radio_range * math.sqrt(n) * 10
    if link_probability(lo, radio_range) <= target:
        return lo
    for _ in range(100):
        mid = (lo + hi) / 2
        if link_probability(mid, radio_range) > target:
            lo = mid
        else:
            hi = mid
    return round(hi, 6)


def draw_positions(rng: random.Random, n: int, side: float):
    return [(round(rng.uniform(0, side), 3), round(rng.uniform(0, side), 3)) for _ in range(n)]


def random_scenario(gen: GenParams, seed: int) -> ScenarioSpec:
    if gen.nodes[0] < 2 or gen.radio_range <= 0:
        raise BadParameter("need at least 2 nodes and a positive range")
    rng = random.Random(f"scenario/{seed}")
    n = rng.randint(*gen.nodes)
    side = area_side(n, gen.radio_range, gen.expected_degree)
    for _ in range(gen.max_tries):
        points = draw_positions(rng, n, side)
        if unit_disk_connected(points, gen.radio_range):
            break
    else:
        raise GenerationFailed(f"no connected placement in {gen.max_tries} draws")

    nodes = []
    for i, (x, y) in enumerate(points):
        limit = rng.choice(gen.route_limits)
        nodes.append(NodeSpec(f"n{i}", x, y, NodeParams(route_limit=limit)))

    pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
    n_flows = min(rng.randint(*gen.flows), len(pairs))
    flows = []
    for a, b in rng.sample(pairs, n_flows):
        start = round(rng.uniform(1000.0, gen.duration / 2), 3)
        rate = round(rng.uniform(*gen.rate_pps), 3)
        flows.append(Flow(f"n{a}", f"n{b}", start, rate))

    if gen.mobility:
        mobility = MobilitySpec("random_waypoint", gen.speed[0], gen.speed[1], gen.pause_ms,
                                round(side, 3), round(side, 3), 200.0)
    else:
        mobility = MobilitySpec()
    spec = ScenarioSpec(
        name=f"random-{seed}", nodes=tuple(nodes), flows=tuple(flows),
        medium=MediumSpec(gen.radio_range, gen.per_hop_latency, gen.loss_rate),
        mobility=mobility, duration=gen.duration, seed=seed, protocol=gen.protocol,
        traffic_jitter=0.2)
    spec.validate()
    return spec
