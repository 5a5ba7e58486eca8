from pathlib import Path

import pytest

from ciaodv.engine import run
from ciaodv.metrics import (
    COLUMNS, ScenarioMismatch, compare, compute_report, render_csv,
)
from ciaodv.scenarios import GenParams, builtin, random_scenario
from ciaodv.trace import MalformedTrace, SimTrace, parse_trace

GOLDEN = Path(__file__).resolve().parent / "golden"


def synthetic(offered, delivered):
    t = SimTrace()
    t.header += [("format", "ciaodv-trace", "1"), ("scenario", "x", "h"), ("seed", "1"),
                 ("node", "0", "A", "2", "unlimited"), ("node", "1", "B", "2", "unlimited"),
                 ("flow", "0", "0", "1", "0.000", "10.0")]
    for k in range(offered):
        t.add(k * 10.0, "gen", 0, "DATA", 0, k, 0, 1, f"{k * 10.0:.3f}", "-")
    for k in range(delivered):
        t.add(k * 10.0 + 7, "deliver", 1, "DATA", 0, k, 0, 1, f"{k * 10.0:.3f}", "0.1")
    for k in range(delivered, offered):
        t.add(k * 10.0 + 2, "drop", 0, "DATA", "NoRoute", 0, k, 0, 1, f"{k * 10.0:.3f}", "-")
    return t


def test_pdr_arithmetic():
    rep = compute_report(synthetic(100, 90))
    f = rep.flows[0]
    assert (f.offered, f.delivered, f.dropped) == (100, 90, 10)
    assert f.pdr == pytest.approx(0.90)
    assert f.mean_latency == pytest.approx(7.0)
    assert f.drops_by_reason == {"NoRoute": 10}


def test_empty_trace_all_zero():
    rep = compute_report(SimTrace())
    assert rep.flows == [] and rep.control_total == 0
    assert rep.control_overhead_ratio == 0.0 and rep.pdr == 0.0
    assert rep.admissions == rep.rejections == rep.route_breaks == rep.rediscoveries == 0


def test_malformed_traces():
    with pytest.raises(MalformedTrace):
        parse_trace("1.0\tgen\n")
    with pytest.raises(MalformedTrace):
        parse_trace("#format\tother\t1\n1.000\tgen\t0\tDATA\t0\n")
    with pytest.raises(MalformedTrace):
        parse_trace("abc\tgen\t0\tDATA\n#format\tciaodv-trace\t1\n")
    bad = synthetic(1, 0)
    bad.add(50.0, "gen", 0, "DATA", 7, 0, 0, 1, "50.000", "-")
    with pytest.raises(MalformedTrace):
        compute_report(bad)
    headerless = SimTrace(header=[("format", "nope")])
    with pytest.raises(MalformedTrace):
        compute_report(headerless)


def test_fig3_ci_reports_admission_rejection():
    rep = compute_report(run(builtin("fig3")))
    d3 = next(f for f in rep.flows if f.dst == "D3")
    assert rep.rejections >= 1
    assert d3.established is False and d3.failure_reason == "AdmissionRejected"
    assert d3.delivered == 0 and d3.rejection_count == 1
    assert all(f.established for f in rep.flows if f.dst != "D3")


def fig1_hand_count():
    """Control messages on the 5-node chain, enumerated from the fixture parameters."""
    n, hello, duration = 5, 1000.0, 5000.0
    rreq = n - 1          # S floods, N1..N3 relay once, D answers instead
    rrep = n - 1          # one unicast per hop back to S
    act = n - 1           # activation walks S..D
    periodic = 0
    for i in range(n):
        first = hello * (i + 1) / (n + 1)
        periodic += int((duration - first) // hello) + 1
    bump = n              # each node beacons once right after its index changes
    return rreq + rrep + act + periodic + bump


def test_fig1_overhead_matches_hand_count():
    rep = compute_report(run(builtin("fig1"), protocol="baseline"))
    assert fig1_hand_count() == 42
    assert rep.control_total == 42
    # offered: 10 pps from 1500 ms through 5000 ms inclusive; the 5000 ms packet
    # is still on the wire when the run stops
    assert rep.offered == 36 and rep.delivered == 35
    assert rep.control_overhead_ratio == pytest.approx(42 / 35)


def test_report_is_a_pure_fold():
    trace = run(builtin("fig2_break"))
    again = parse_trace(trace.render())
    assert render_csv(compute_report(trace)) == render_csv(compute_report(again))
    assert compute_report(trace) == compute_report(trace)


def test_conservation_and_route_reconciliation_random():
    gen = GenParams(nodes=(5, 30), flows=(1, 10))
    for seed in range(1, 31):
        rep = compute_report(run(random_scenario(gen, seed)))
        for f in rep.flows:
            assert f.offered == f.delivered + f.dropped + f.in_flight
            assert 0.0 <= f.pdr <= 1.0 and f.delivered <= f.offered
        assert rep.live_routes == rep.held_routes_at_end


def test_csv_layout():
    text = compute_report(run(builtin("fig2"))).to_csv()
    lines = text.splitlines()
    assert lines[0].startswith("# ciaodv-metrics 1 scenario=")
    assert lines[1].split(",") == list(COLUMNS)
    assert [ln.split(",")[0] for ln in lines[2:]] == ["flow0", "flow1", "GLOBAL"]
    assert COLUMNS[:8] == ("row", "src", "dst", "offered", "delivered", "dropped",
                           "in_flight", "pdr")


def test_compare_identical_is_all_zero():
    rep = compute_report(run(builtin("fig1")))
    table = compare(rep, rep)
    assert table.all_zero() and set(table.deltas().values()) == {0}


def test_compare_mismatch():
    a = compute_report(run(builtin("fig1")))
    b = compute_report(run(builtin("fig2")))
    with pytest.raises(ScenarioMismatch):
        compare(a, b)


def test_star_relay_compare_golden():
    spec = builtin("star_relay")
    base = compute_report(run(spec, protocol="baseline"))
    ci = compute_report(run(spec, protocol="ci"))
    assert sum(f.established for f in ci.flows) < sum(f.established for f in base.flows)
    assert ci.admitted_pdr() > base.admitted_pdr()
    table = compare(base, ci, "baseline", "ci")
    assert table.render() == (GOLDEN / "star_relay_compare.csv").read_text()
