"""Command-line entry point: ``ciaodv run | compare | sweep | export``.

Exit codes: 0 success, 1 internal error, 2 usage or scenario error.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import List, Optional

from . import metrics
from .engine import run as simulate
from .scenarios import (
    BUILTIN_NAMES, ScenarioError, ScenarioErrors, ScenarioSpec, builtin, load_scenario,
    render_scenario,
)

SWEEP_PARAMS = ("route_limit", "flow_count", "loss_rate")


class UsageError(Exception):
    pass


def resolve_scenario(name: str) -> ScenarioSpec:
    """A built-in name, or a path to a scenario file."""
    if name in BUILTIN_NAMES:
        return builtin(name)
    if not os.path.exists(name):
        raise UsageError(f"{name}: no such file and not a built-in scenario "
                         f"({', '.join(BUILTIN_NAMES)})")
    return load_scenario(name)


def _parse_seed_list(text: str) -> List[int]:
    seeds: List[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise UsageError("empty seed list")
    return seeds


def _parse_values(param: str, text: str) -> list:
    raw = [v.strip() for v in text.split(",") if v.strip()]
    if not raw:
        raise UsageError("--sweep-values must list at least one value")
    out = []
    for v in raw:
        try:
            if param == "route_limit":
                limit = None if v.lower() in ("unlimited", "none") else int(v)
                if limit is not None and limit < 1:
                    raise ValueError
                out.append(limit)
            elif param == "flow_count":
                n = int(v)
                if n < 0:
                    raise ValueError
                out.append(n)
            else:
                p = float(v)
                if not 0.0 <= p <= 1.0:
                    raise ValueError
                out.append(p)
        except ValueError:
            raise UsageError(f"bad value {v!r} for {param}") from None
    return out


def apply_sweep(spec: ScenarioSpec, param: str, value) -> ScenarioSpec:
    if param == "route_limit":
        return spec.with_route_limit(value)
    if param == "flow_count":
        if value > len(spec.flows):
            raise UsageError(f"flow_count {value} exceeds the {len(spec.flows)} flows "
                             f"in {spec.name}")
        return replace(spec, flows=spec.flows[:value])
    return replace(spec, medium=replace(spec.medium, loss_rate=value))


def _fmt_value(value) -> str:
    return "unlimited" if value is None else str(value)


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _overrides(spec: ScenarioSpec, args) -> ScenarioSpec:
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if args.duration_ms is not None:
        spec = replace(spec, duration=args.duration_ms)
    return spec


# -- commands ----------------------------------------------------------------

def cmd_run(args) -> int:
    spec = _overrides(resolve_scenario(args.scenario), args)
    trace = simulate(spec, protocol=args.protocol)
    report = metrics.compute_report(trace)
    if args.trace_out:
        trace.write(args.trace_out)
    if args.report_out:
        _write(args.report_out, report.to_csv())
    if args.format == "lines":
        if not args.trace_out:
            sys.stdout.write(trace.render())
    elif not args.report_out:
        sys.stdout.write(report.to_csv())
    return 0


def cmd_compare(args) -> int:
    spec = _overrides(resolve_scenario(args.scenario), args)
    reports = [metrics.compute_report(simulate(spec, protocol=p)) for p in ("baseline", "ci")]
    table = metrics.compare(reports[0], reports[1], "baseline", "ci")
    _write(args.report_out, table.render())
    return 0


def _sweep_job(job):
    spec, protocol, param, value, seed = job
    report = metrics.compute_report(simulate(spec, seed=seed, protocol=protocol))
    prefix = [param, _fmt_value(value), str(seed), protocol]
    return [prefix + row for row in metrics.report_rows(report)]


def cmd_sweep(args) -> int:
    if not args.sweep_param:
        raise UsageError("sweep needs --sweep-param")
    if args.sweep_values is None:
        raise UsageError("sweep needs --sweep-values")
    values = _parse_values(args.sweep_param, args.sweep_values)
    base = resolve_scenario(args.scenario)
    if args.duration_ms is not None:
        base = replace(base, duration=args.duration_ms)
    seeds = _parse_seed_list(args.seeds) if args.seeds else [base.seed]
    jobs = []
    for value in values:
        spec = apply_sweep(base, args.sweep_param, value)
        for seed in seeds:
            jobs.append((spec, args.protocol, args.sweep_param, value, seed))
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    rows = [row for block in results for row in block]
    header = ("param", "value", "seed", "protocol") + metrics.COLUMNS
    pre = f"# {metrics.METRICS_FORMAT}-sweep {metrics.METRICS_VERSION} scenario={base.name}\n"
    _write(args.report_out, metrics.csv_text(header, rows, pre))
    return 0


def cmd_export(args) -> int:
    _write(args.report_out, render_scenario(resolve_scenario(args.scenario)))
    return 0


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ciaodv", description="AODV / connection-index "
                                "admission simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, protocol=True):
        sp.add_argument("--scenario", required=True,
                        help="built-in name or scenario file path")
        if protocol:
            sp.add_argument("--protocol", choices=("baseline", "ci"), default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--duration-ms", type=float, default=None)
        sp.add_argument("--report-out", default=None, help="report path (default stdout)")

    r = sub.add_parser("run", help="simulate one scenario")
    common(r)
    r.add_argument("--trace-out", default=None)
    r.add_argument("--format", choices=("csv", "lines"), default="csv",
                   help="what goes to stdout: metrics CSV or trace lines")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="baseline vs ci on one scenario and seed")
    common(c, protocol=False)
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("sweep", help="one report row block per (value, seed)")
    common(s)
    s.add_argument("--sweep-param", choices=SWEEP_PARAMS)
    s.add_argument("--sweep-values", default=None, help="comma list, e.g. 1,2,3,unlimited")
    s.add_argument("--seeds", default=None, help="comma list or ranges, e.g. 1-10,20")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    e = sub.add_parser("export", help="print a scenario in file format")
    e.add_argument("--scenario", required=True)
    e.add_argument("--report-out", default=None)
    e.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    if getattr(args, "command", None) == "sweep" and args.protocol is None:
        args.protocol = "ci"
    try:
        return args.func(args)
    except ScenarioErrors as exc:
        for err in exc.errors:
            print(f"{args.scenario}: {err}", file=sys.stderr)
        return 2
    except (ScenarioError, UsageError, OSError) as exc:
        print(f"ciaodv: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - last-resort contract
        print(f"ciaodv: internal error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
