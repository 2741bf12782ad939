"""Command-line entry point: validate scenarios, solve them, compare methods.

Output is machine-first: ``solve`` prints a JSON report, ``compare`` emits a
CSV table; plots are the user's business, built from those files.  Exit
codes: 0 solved, 1 usage or internal error, 2 infeasible, 3 a node/time
limit stopped the search but an incumbent exists.

Set ``NCOSPAN_LOG=debug|info|warning`` to control log verbosity.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Sequence

from . import greedy as greedy_mod
from .check import check_solution
from .milp import Solution, solve_bnb
from .power import PRESET_RADIOS
from .scenario import Scenario, ScenarioError, load_scenario, validate_scenario
from .solver import BnbLimits
from .span import node_spans

__all__ = ["main", "SolveReport", "run_method"]

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_LIMIT = 3

MHZ = 1.0e6


@dataclass
class SolveReport:
    """Lossless, serializable record of one solve run."""

    method: str
    status: str
    objective_w: float | None
    lower_bound_w: float | None
    gap: float | None
    tx_rf_w: float | None
    tx_circuit_w: float | None
    rx_circuit_w: float | None
    span_table: list[dict[str, Any]]
    routes: list[dict[str, Any]]
    feasible: bool | None
    violations: list[str]
    runtime_s: float
    seed: int
    solver: dict[str, Any] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "status": self.status,
            "objective_w": self.objective_w,
            "lower_bound_w": self.lower_bound_w,
            "gap": self.gap,
            "power_breakdown_w": {
                "tx_rf": self.tx_rf_w,
                "tx_circuit": self.tx_circuit_w,
                "rx_circuit": self.rx_circuit_w,
                "total": self.objective_w,
            },
            "span_table": self.span_table,
            "routes": self.routes,
            "feasible": self.feasible,
            "violations": self.violations,
            "runtime_s": self.runtime_s,
            "seed": self.seed,
            "solver": self.solver,
            "warnings": self.warnings,
        }


def _span_table(scenario: Scenario, solution: Solution) -> list[dict[str, Any]]:
    if solution.schedule is None:
        return []
    spans = node_spans(solution.schedule, scenario)
    rows = []
    for node in scenario.nodes:
        for mode, chans, q in (
            ("tx", sorted(solution.schedule.tx_channels(node.id)), spans.tx(node.id)),
            ("rx", sorted(solution.schedule.rx_channels(node.id)), spans.rx(node.id)),
        ):
            rows.append({"node": node.id, "mode": mode, "channels": chans, "span_mhz": q / MHZ})
    return rows


def _routes(scenario: Scenario, solution: Solution) -> list[dict[str, Any]]:
    out = []
    for l, sess in enumerate(scenario.sessions):
        edges = [
            {"tx": i, "rx": j, "channel": m, "rate_bps": v}
            for (i, j, m, ll), v in sorted(solution.flows.items())
            if ll == l and v > 1e-9
        ]
        out.append({"session": l, "source": sess.source, "dest": sess.dest, "rate_bps": sess.rate_bps, "edges": edges})
    return out


def run_method(
    scenario: Scenario,
    method: str,
    limits: BnbLimits | None = None,
    seed: int | None = None,
) -> Solution:
    """Run one solver pipeline; greedy warm-starts the branch-and-bound."""
    if method == "greedy":
        return greedy_mod.solve_greedy(scenario, seed=seed)
    if method == "bnb":
        warm = None
        try:
            warm = greedy_mod.solve_greedy(scenario, seed=seed)
        except greedy_mod.GreedyError:
            warm = None
        return solve_bnb(scenario, limits=limits, warm_start=warm)
    if method == "txmin":
        return greedy_mod.tx_power_min(scenario, limits=limits, seed=seed)
    if method == "bestchan":
        return greedy_mod.best_channel_min(scenario)
    raise ValueError(f"unknown method '{method}'")


def build_report(scenario: Scenario, solution: Solution, runtime_s: float, seed: int) -> SolveReport:
    feasible = None
    violations: list[str] = []
    if solution.schedule is not None:
        report = check_solution(scenario, solution.schedule, solution.powers, solution.flows)
        feasible = report.ok
        violations = report.violations
    bnb = solution.bnb
    solver_stats: dict[str, Any] = {}
    lower = gap = None
    if bnb is not None:
        solver_stats = {"bnb_status": bnb.status, "nodes_explored": bnb.nodes_explored}
        if solution.method == "bnb":
            lower = bnb.lower_bound
            gap = bnb.gap
    bd = solution.breakdown
    return SolveReport(
        method=solution.method,
        status=solution.status,
        objective_w=None if bd is None else bd.total_w,
        lower_bound_w=lower,
        gap=gap,
        tx_rf_w=None if bd is None else bd.tx_rf_w,
        tx_circuit_w=None if bd is None else bd.tx_circuit_w,
        rx_circuit_w=None if bd is None else bd.rx_circuit_w,
        span_table=_span_table(scenario, solution),
        routes=_routes(scenario, solution),
        feasible=feasible,
        violations=violations,
        runtime_s=runtime_s,
        seed=seed,
        warnings=list(solution.warnings),
        solver=solver_stats,
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _load(args) -> Scenario:
    scenario = load_scenario(args.scenario)
    if args.radio is not None:
        if args.radio not in PRESET_RADIOS:
            raise ScenarioError(f"unknown radio preset '{args.radio}'")
        scenario = scenario.with_radio(PRESET_RADIOS[args.radio])
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    return scenario


def cmd_validate(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
        validate_scenario(scenario)
    except (ScenarioError, OSError) as exc:
        print(f"invalid: {exc}")
        return EXIT_ERROR
    print(
        f"ok: {len(scenario.nodes)} nodes, {len(scenario.links)} links, "
        f"{len(scenario.channels)} channels, {len(scenario.sessions)} sessions"
    )
    return EXIT_OK


def _limits(args) -> BnbLimits:
    return BnbLimits(gap_tol=args.gap, max_nodes=args.max_nodes, time_limit_s=args.time_limit)


def cmd_solve(args) -> int:
    scenario = _load(args)
    seed = scenario.rng_seed
    start = time.monotonic()
    try:
        solution = run_method(scenario, args.method, limits=_limits(args), seed=seed)
    except greedy_mod.GreedyError as exc:
        report = {"method": args.method, "status": "infeasible", "error": str(exc), "seed": seed}
        _emit(json.dumps(report, indent=2), args.out)
        return EXIT_INFEASIBLE
    runtime = time.monotonic() - start
    report = build_report(scenario, solution, runtime, seed)
    _emit(json.dumps(report.to_dict(), indent=2), args.out)
    if solution.status == "infeasible":
        return EXIT_INFEASIBLE
    if solution.status == "limit":
        return EXIT_LIMIT if solution.schedule is not None else EXIT_INFEASIBLE
    return EXIT_OK


COMPARE_COLUMNS = [
    "method",
    "status",
    "total_w",
    "tx_rf_w",
    "tx_circuit_w",
    "rx_circuit_w",
    "sum_tx_span_mhz",
    "sum_rx_span_mhz",
    "feasible",
    "error",
]


def compare_rows(scenario: Scenario, methods: Sequence[str], limits: BnbLimits, seed: int | None) -> list[dict[str, Any]]:
    rows = []
    for method in methods:
        row: dict[str, Any] = {c: "" for c in COMPARE_COLUMNS}
        row["method"] = method
        try:
            solution = run_method(scenario, method, limits=limits, seed=seed)
            bd = solution.breakdown
            row["status"] = solution.status
            if bd is not None and solution.schedule is not None:
                spans = node_spans(solution.schedule, scenario)
                row["total_w"] = f"{bd.total_w:.6g}"
                row["tx_rf_w"] = f"{bd.tx_rf_w:.6g}"
                row["tx_circuit_w"] = f"{bd.tx_circuit_w:.6g}"
                row["rx_circuit_w"] = f"{bd.rx_circuit_w:.6g}"
                row["sum_tx_span_mhz"] = f"{sum(spans.tx_hz.values()) / MHZ:.6g}"
                row["sum_rx_span_mhz"] = f"{sum(spans.rx_hz.values()) / MHZ:.6g}"
                row["feasible"] = str(
                    check_solution(scenario, solution.schedule, solution.powers, solution.flows).ok
                )
        except Exception as exc:  # row-level failure must not kill the run
            row["status"] = "error"
            row["error"] = str(exc)
        rows.append(row)
    return rows


def cmd_compare(args) -> int:
    if not args.methods:
        print("no methods given", file=sys.stderr)
        return EXIT_ERROR
    for m in args.methods:
        if m not in ("bnb", "greedy", "txmin", "bestchan"):
            print(f"unknown method '{m}'", file=sys.stderr)
            return EXIT_ERROR
    scenario = _load(args)
    rows = compare_rows(scenario, args.methods, _limits(args), scenario.rng_seed)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COMPARE_COLUMNS)
    writer.writeheader()
    writer.writerows(rows)
    _emit(buf.getvalue().rstrip("\n"), args.csv or args.out)
    return EXIT_OK


def _emit(text: str, out_path: str | None) -> None:
    print(text)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.write("\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ncospan", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True, help="scenario file (JSON)")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--radio", choices=sorted(PRESET_RADIOS), default=None, help="override the radio profile")
        p.add_argument("--gap", type=float, default=0.0, help="relative optimality gap to stop at")
        p.add_argument("--max-nodes", type=int, default=None, help="node budget for branch and bound")
        p.add_argument("--time-limit", type=float, default=None, help="wall-clock budget in seconds")
        p.add_argument("--out", default=None, help="also write the report to this file")

    pv = sub.add_parser("validate", help="load a scenario and run every invariant")
    pv.add_argument("--scenario", required=True)
    pv.set_defaults(func=cmd_validate)

    ps = sub.add_parser("solve", help="solve a scenario with one method")
    common(ps)
    ps.add_argument("--method", choices=["bnb", "greedy", "txmin", "bestchan"], default="greedy")
    ps.set_defaults(func=cmd_solve)

    pc = sub.add_parser("compare", help="run several methods on one scenario")
    common(pc)
    pc.add_argument("--methods", nargs="+", default=[], help="methods to run")
    pc.add_argument("--csv", default=None, help="write the comparison CSV here")
    pc.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("NCOSPAN_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
