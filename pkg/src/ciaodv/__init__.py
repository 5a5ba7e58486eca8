"""Packet-level MANET simulator: AODV with connection-index admission."""
from .engine import Simulator, run
from .metrics import MetricsReport, compare, compute_report
from .node import NodeParams, admission_check
from .scenarios import ScenarioSpec, builtin, load_scenario, parse_scenario, render_scenario
from .trace import SimTrace, parse_trace, read_trace

__all__ = [
    "Simulator", "run", "MetricsReport", "compare", "compute_report", "NodeParams",
    "admission_check", "ScenarioSpec", "builtin", "load_scenario", "parse_scenario",
    "render_scenario", "SimTrace", "parse_trace", "read_trace",
]
