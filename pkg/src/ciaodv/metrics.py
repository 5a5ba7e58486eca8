"""Fold a simulation trace into per-flow and global results.

:func:`compute_report` is a pure function of the trace records and header.
Reports render to CSV with one row per flow and a final ``GLOBAL`` row; the
column order in :data:`COLUMNS` is part of the command-line contract.
"""
from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .core import CONTROL_KINDS
from .trace import TRACE_FORMAT, MalformedTrace, SimTrace

METRICS_FORMAT = "ciaodv-metrics"
METRICS_VERSION = "1"

BREAK_REASONS = ("broken", "no_route")


class ScenarioMismatch(ValueError):
    pass


@dataclass
class FlowReport:
    flow: int
    src: str
    dst: str
    offered: int = 0
    delivered: int = 0
    dropped: int = 0
    in_flight: int = 0
    mean_latency: Optional[float] = None
    discovery_latency: Optional[float] = None
    established: bool = False
    rejection_count: int = 0
    failure_reason: str = ""
    drops_by_reason: Dict[str, int] = field(default_factory=dict)

    @property
    def pdr(self) -> float:
        return self.delivered / self.offered if self.offered else 0.0


@dataclass
class MetricsReport:
    scenario_hash: str = ""
    seed: str = ""
    flows: List[FlowReport] = field(default_factory=list)
    control_messages_by_kind: Dict[str, int] = field(
        default_factory=lambda: {k: 0 for k in CONTROL_KINDS})
    admissions: int = 0
    teardowns: int = 0
    rejections: int = 0
    route_breaks: int = 0
    rediscoveries: int = 0
    held_routes_at_end: int = 0

    @property
    def offered(self) -> int:
        return sum(f.offered for f in self.flows)

    @property
    def delivered(self) -> int:
        return sum(f.delivered for f in self.flows)

    @property
    def control_total(self) -> int:
        return sum(self.control_messages_by_kind.values())

    @property
    def control_overhead_ratio(self) -> float:
        if not self.control_total:
            return 0.0
        if not self.delivered:
            return float("inf")
        return self.control_total / self.delivered

    @property
    def live_routes(self) -> int:
        return self.admissions - self.teardowns

    @property
    def pdr(self) -> float:
        return self.delivered / self.offered if self.offered else 0.0

    def admitted_pdr(self) -> float:
        """Delivery ratio over flows that got a route at some point."""
        offered = sum(f.offered for f in self.flows if f.established)
        delivered = sum(f.delivered for f in self.flows if f.established)
        return delivered / offered if offered else 0.0

    def to_csv(self) -> str:
        return render_csv(self)


def _int(text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise MalformedTrace(f"bad {what}: {text!r}") from None


def compute_report(trace: SimTrace) -> MetricsReport:
    report = MetricsReport()
    if trace.header:
        if trace.header_value("format") != TRACE_FORMAT:
            raise MalformedTrace("missing or unknown format header")
        scenario = trace.header_values("scenario")
        if scenario and len(scenario[0]) >= 2:
            report.scenario_hash = scenario[0][1]
        report.seed = trace.header_value("seed", "")

    labels: Dict[str, str] = {}
    for row in trace.header_values("node"):
        if len(row) < 2:
            raise MalformedTrace(f"bad node header {row!r}")
        labels[row[0]] = row[1]
    pairs: Dict[Tuple[str, str], List[FlowReport]] = {}
    starts: Dict[int, float] = {}
    for row in trace.header_values("flow"):
        if len(row) < 4:
            raise MalformedTrace(f"bad flow header {row!r}")
        fi = _int(row[0], "flow id")
        fr = FlowReport(fi, labels.get(row[1], row[1]), labels.get(row[2], row[2]))
        report.flows.append(fr)
        pairs.setdefault((row[1], row[2]), []).append(fr)
        starts[fi] = float(row[3])
    by_id = {f.flow: f for f in report.flows}

    def flow_of(fields_) -> FlowReport:
        if not fields_:
            raise MalformedTrace("data record without flow id")
        f = by_id.get(_int(fields_[0], "flow id"))
        if f is None:
            raise MalformedTrace(f"data record for undeclared flow {fields_[0]}")
        return f

    latency_sum: Dict[int, float] = {}
    first_established: Dict[Tuple[str, str], float] = {}
    last_established: Dict[Tuple[str, str], float] = {}
    last_failure: Dict[Tuple[str, str], Tuple[float, str]] = {}
    rejections: Counter = Counter()
    summary = None

    for t, kind, node, mkind, f in trace.records:
        if kind == "tx":
            if mkind in report.control_messages_by_kind:
                report.control_messages_by_kind[mkind] += 1
        elif mkind == "DATA" and kind == "gen":
            flow_of(f).offered += 1
        elif mkind == "DATA" and kind == "deliver":
            fr = flow_of(f)
            fr.delivered += 1
            latency_sum[fr.flow] = latency_sum.get(fr.flow, 0.0) + (t - float(f[4]))
        elif mkind == "DATA" and kind == "drop":
            if len(f) < 2:
                raise MalformedTrace("drop record without reason")
            fr = flow_of(f[1:])
            fr.dropped += 1
            fr.drops_by_reason[f[0]] = fr.drops_by_reason.get(f[0], 0) + 1
        elif kind == "act":
            if mkind == "ESTABLISH":
                report.admissions += 1
                dst = f[1].rsplit(",", 1)[-1]
                key = (node, dst)
                first_established.setdefault(key, t)
                last_established[key] = t
            elif mkind == "ROUTE_END":
                report.teardowns += 1
                if f[1] in BREAK_REASONS:
                    report.route_breaks += 1
            elif mkind == "REJECT":
                report.rejections += 1
                rejections[(node, f[0])] += 1
            elif mkind == "DISCOVER" and f[3] == "rediscover":
                report.rediscoveries += 1
            elif mkind == "FAIL":
                last_failure[(node, f[0])] = (t, f[1])
        elif kind == "end" and mkind == "SUMMARY":
            summary = f

    if summary is not None:
        if summary[0] != "-":
            for item in summary[0].split(","):
                fi, n = item.split(":")
                by_id[_int(fi, "flow id")].in_flight = _int(n, "in-flight count")
        report.held_routes_at_end = _int(summary[1], "held routes")

    for key, frs in pairs.items():
        est = first_established.get(key)
        fail = last_failure.get(key)
        for fr in frs:
            fr.established = est is not None
            if est is not None:
                fr.discovery_latency = round(est - starts[fr.flow], 3)
            fr.rejection_count = rejections[key]
            if fail is not None and fail[0] >= last_established.get(key, -1.0):
                fr.failure_reason = fail[1]
            if fr.delivered:
                fr.mean_latency = latency_sum[fr.flow] / fr.delivered
    return report


# -- CSV ---------------------------------------------------------------------

COLUMNS = (
    "row", "src", "dst", "offered", "delivered", "dropped", "in_flight", "pdr",
    "mean_latency_ms", "discovery_latency_ms", "established", "rejection_count",
    "failure_reason", "admissions", "teardowns", "live_routes", "rejections",
    "route_breaks", "rediscoveries",
) + tuple(f"ctl_{k}" for k in CONTROL_KINDS) + ("ctl_total", "control_overhead_ratio")


def _num(value: Optional[float], digits: int) -> str:
    if value is None:
        return ""
    return f"{value:.{digits}f}"


def report_rows(report: MetricsReport) -> List[List[str]]:
    rows = []
    for f in report.flows:
        row = {c: "" for c in COLUMNS}
        row.update(
            row=f"flow{f.flow}", src=f.src, dst=f.dst, offered=str(f.offered),
            delivered=str(f.delivered), dropped=str(f.dropped), in_flight=str(f.in_flight),
            pdr=_num(f.pdr, 6), mean_latency_ms=_num(f.mean_latency, 3),
            discovery_latency_ms=_num(f.discovery_latency, 3),
            established="true" if f.established else "false",
            rejection_count=str(f.rejection_count), failure_reason=f.failure_reason,
        )
        rows.append([row[c] for c in COLUMNS])
    g = {c: "" for c in COLUMNS}
    g.update(
        row="GLOBAL", offered=str(report.offered), delivered=str(report.delivered),
        dropped=str(sum(f.dropped for f in report.flows)),
        in_flight=str(sum(f.in_flight for f in report.flows)), pdr=_num(report.pdr, 6),
        established=str(sum(f.established for f in report.flows)),
        rejection_count=str(sum(f.rejection_count for f in report.flows)),
        admissions=str(report.admissions), teardowns=str(report.teardowns),
        live_routes=str(report.live_routes), rejections=str(report.rejections),
        route_breaks=str(report.route_breaks), rediscoveries=str(report.rediscoveries),
        ctl_total=str(report.control_total),
        control_overhead_ratio=_num(report.control_overhead_ratio, 6),
    )
    for k, n in report.control_messages_by_kind.items():
        g[f"ctl_{k}"] = str(n)
    rows.append([g[c] for c in COLUMNS])
    return rows


def csv_text(header, rows, preamble: str = "") -> str:
    buf = io.StringIO()
    buf.write(preamble)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def render_csv(report: MetricsReport) -> str:
    pre = (f"# {METRICS_FORMAT} {METRICS_VERSION} scenario={report.scenario_hash}"
           f" seed={report.seed}\n")
    return csv_text(COLUMNS, report_rows(report), pre)


# -- comparison --------------------------------------------------------------

@dataclass
class ComparisonTable:
    label_a: str
    label_b: str
    rows: List[Tuple[str, float, float]] = field(default_factory=list)

    def deltas(self) -> Dict[str, float]:
        return {name: b - a for name, a, b in self.rows}

    def all_zero(self) -> bool:
        return all(a == b for _name, a, b in self.rows)

    def render(self) -> str:
        out = []
        for name, a, b in self.rows:
            out.append([name, _fmt(a), _fmt(b), _fmt(b - a)])
        return csv_text(("metric", self.label_a, self.label_b, "delta"), out)


def _fmt(x: float) -> str:
    if isinstance(x, int):
        return str(x)
    return f"{x:.6f}"


def _metric_rows(r: MetricsReport) -> List[Tuple[str, float]]:
    rows: List[Tuple[str, float]] = []
    for f in r.flows:
        p = f"flow{f.flow}.{f.src}->{f.dst}."
        rows += [(p + "offered", f.offered), (p + "delivered", f.delivered),
                 (p + "pdr", f.pdr), (p + "mean_latency_ms", f.mean_latency or 0.0),
                 (p + "established", int(f.established)),
                 (p + "rejection_count", f.rejection_count)]
    rows += [("admitted_flows", sum(f.established for f in r.flows)),
             ("pdr", r.pdr), ("admitted_pdr", r.admitted_pdr()),
             ("admissions", r.admissions), ("rejections", r.rejections),
             ("route_breaks", r.route_breaks), ("rediscoveries", r.rediscoveries),
             ("control_total", r.control_total)]
    rows += [(f"ctl_{k}", n) for k, n in r.control_messages_by_kind.items()]
    return rows


def compare(a: MetricsReport, b: MetricsReport, label_a: str = "a",
            label_b: str = "b") -> ComparisonTable:
    if a.scenario_hash != b.scenario_hash:
        raise ScenarioMismatch(f"scenario {a.scenario_hash!r} vs {b.scenario_hash!r}")
    ra, rb = _metric_rows(a), _metric_rows(b)
    table = ComparisonTable(label_a, label_b)
    for (name, va), (_n, vb) in zip(ra, rb):
        table.rows.append((name, va, vb))
    return table
