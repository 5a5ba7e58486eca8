"""Line-oriented simulation trace.

Header lines start with ``#`` and carry tab-separated key/values (format
version, scenario hash, seed, protocol, nodes, flows, parameters). Each body
line is one event::

    time <TAB> event_kind <TAB> at_node <TAB> message_kind <TAB> fields...

Node columns and message fields hold integer node ids; the ``#node`` header
lines map ids to labels.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

from .core import fmt_time

TRACE_FORMAT = "ciaodv-trace"
TRACE_VERSION = "1"


class MalformedTrace(ValueError):
    pass


Record = Tuple[float, str, str, str, Tuple[str, ...]]


@dataclass
class SimTrace:
    header: List[Tuple[str, ...]] = field(default_factory=list)
    records: List[Record] = field(default_factory=list)

    def add(self, time: float, kind: str, node, mkind: str, *fields) -> None:
        self.records.append((time, kind, str(node), mkind, tuple(str(f) for f in fields)))

    def header_values(self, key: str) -> List[Tuple[str, ...]]:
        return [row[1:] for row in self.header if row[0] == key]

    def header_value(self, key: str, default=None):
        rows = self.header_values(key)
        return rows[0][0] if rows and rows[0] else default

    def select(self, kind=None, mkind=None, node=None):
        for rec in self.records:
            if kind is not None and rec[1] != kind:
                continue
            if mkind is not None and rec[3] != mkind:
                continue
            if node is not None and rec[2] != str(node):
                continue
            yield rec

    def lines(self):
        for row in self.header:
            yield "#" + "\t".join(row)
        for t, kind, node, mkind, fields in self.records:
            yield "\t".join((fmt_time(t), kind, node, mkind) + fields)

    def render(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.render())


def parse_trace(text: str) -> SimTrace:
    trace = SimTrace()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line:
            continue
        if line.startswith("#"):
            trace.header.append(tuple(line[1:].split("\t")))
            continue
        parts = line.split("\t")
        if len(parts) < 4:
            raise MalformedTrace(f"line {lineno}: expected at least 4 fields")
        try:
            t = float(parts[0])
        except ValueError:
            raise MalformedTrace(f"line {lineno}: bad time {parts[0]!r}") from None
        trace.records.append((t, parts[1], parts[2], parts[3], tuple(parts[4:])))
    if trace.records and trace.header_value("format") != TRACE_FORMAT:
        raise MalformedTrace("missing or unknown format header")
    return trace


def read_trace(path) -> SimTrace:
    with open(path, encoding="utf-8") as fh:
        return parse_trace(fh.read())
