"""Linear programming and branch-and-bound over binary variables.

:func:`solve_lp` hands a :class:`LinearProgram` to scipy's HiGHS backend and
maps the outcome onto an explicit status; a numerical failure is reported,
never silently turned into an answer.  :func:`branch_and_bound` implements
best-bound search with most-fractional branching.

Branch-and-bound supports an optional ``incumbent_evaluator``: a callable
that prices an integral assignment with the *true* (possibly nonlinear)
objective and returns the certified value plus arbitrary payload.  With an
evaluator installed, a node whose relaxation happens to be integral is still
branched (unless every binary is fixed or the bound prunes it), because the
relaxation value underestimates the true value and fathoming on integrality
would not be exact.  Without an evaluator the classic rule applies and
integral nodes are fathomed immediately.

All tolerances live in module constants: feasibility 1e-7, integrality 1e-6.
"""

from __future__ import annotations

import heapq
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

__all__ = [
    "LinearProgram",
    "LpResult",
    "solve_lp",
    "BnbLimits",
    "BnbResult",
    "branch_and_bound",
    "FEASIBILITY_TOL",
    "INTEGRALITY_TOL",
]

log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-7
INTEGRALITY_TOL = 1e-6
_PRUNE_EPS = 1e-9


class LinearProgram:
    """Sparse minimization LP built row by row."""

    def __init__(self) -> None:
        self.obj: list[float] = []
        self.low: list[float] = []
        self.high: list[float] = []
        self.names: list[str] = []
        self.rows: list[tuple[list[int], list[float]]] = []
        self.senses: list[str] = []
        self.rhs: list[float] = []
        self.row_names: list[str] = []
        self._cache: tuple | None = None

    # -- construction ------------------------------------------------------

    def add_variable(self, low: float = 0.0, high: float | None = None, objective: float = 0.0, name: str = "") -> int:
        self.obj.append(objective)
        self.low.append(low)
        self.high.append(np.inf if high is None else high)
        self.names.append(name or f"v{len(self.obj) - 1}")
        self._cache = None
        return len(self.obj) - 1

    def add_constraint(self, coeffs: Iterable[tuple[int, float]] | dict[int, float], sense: str, rhs: float, name: str = "") -> int:
        if sense not in ("<=", ">=", "=="):
            raise ValueError(f"bad sense {sense!r}")
        items = coeffs.items() if isinstance(coeffs, dict) else coeffs
        idx: list[int] = []
        val: list[float] = []
        for j, a in items:
            if a == 0.0:
                continue
            if not 0 <= j < len(self.obj):
                raise ValueError(f"constraint references undeclared variable {j}")
            idx.append(j)
            val.append(float(a))
        self.rows.append((idx, val))
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.row_names.append(name or f"r{len(self.rows) - 1}")
        self._cache = None
        return len(self.rows) - 1

    @property
    def num_variables(self) -> int:
        return len(self.obj)

    @property
    def num_constraints(self) -> int:
        return len(self.rows)

    # -- scipy bridge -------------------------------------------------------

    def _matrices(self):
        if self._cache is None:
            n = len(self.obj)
            ub_r, ub_c, ub_v, ub_b = [], [], [], []
            eq_r, eq_c, eq_v, eq_b = [], [], [], []
            for (idx, val), sense, rhs in zip(self.rows, self.senses, self.rhs):
                if sense == "==":
                    r = len(eq_b)
                    eq_r.extend([r] * len(idx))
                    eq_c.extend(idx)
                    eq_v.extend(val)
                    eq_b.append(rhs)
                else:
                    sgn = 1.0 if sense == "<=" else -1.0
                    r = len(ub_b)
                    ub_r.extend([r] * len(idx))
                    ub_c.extend(idx)
                    ub_v.extend(sgn * v for v in val)
                    ub_b.append(sgn * rhs)
            a_ub = sparse.csr_matrix((ub_v, (ub_r, ub_c)), shape=(len(ub_b), n)) if ub_b else None
            a_eq = sparse.csr_matrix((eq_v, (eq_r, eq_c)), shape=(len(eq_b), n)) if eq_b else None
            self._cache = (
                np.asarray(self.obj, dtype=float),
                a_ub,
                np.asarray(ub_b, dtype=float),
                a_eq,
                np.asarray(eq_b, dtype=float),
            )
        return self._cache

    def check_point(self, x: np.ndarray, tol: float = 1e-6) -> list[str]:
        """Names of bounds/rows the point violates beyond a relative tolerance."""
        bad = []
        for j in range(len(self.obj)):
            scale = max(1.0, abs(self.low[j]), abs(x[j]))
            if x[j] < self.low[j] - tol * scale or x[j] > self.high[j] + tol * scale:
                bad.append(f"bound:{self.names[j]}")
        for (idx, val), sense, rhs, name in zip(self.rows, self.senses, self.rhs, self.row_names):
            lhs = sum(a * x[j] for j, a in zip(idx, val))
            scale = max(1.0, abs(rhs))
            if sense == "<=" and lhs > rhs + tol * scale:
                bad.append(f"row:{name}")
            elif sense == ">=" and lhs < rhs - tol * scale:
                bad.append(f"row:{name}")
            elif sense == "==" and abs(lhs - rhs) > tol * scale:
                bad.append(f"row:{name}")
        return bad


@dataclass(frozen=True)
class LpResult:
    status: str  # optimal | infeasible | unbounded | error
    objective: float | None = None
    x: np.ndarray | None = None
    message: str = ""


def solve_lp(lp: LinearProgram, bounds_override: dict[int, tuple[float, float]] | None = None) -> LpResult:
    """Solve the LP; deterministic for identical input."""
    c, a_ub, b_ub, a_eq, b_eq = lp._matrices()
    low = np.asarray(lp.low, dtype=float)
    high = np.asarray(lp.high, dtype=float)
    if bounds_override:
        low = low.copy()
        high = high.copy()
        for j, (lo, hi) in bounds_override.items():
            low[j] = lo
            high[j] = hi
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub if a_ub is not None else None,
        A_eq=a_eq,
        b_eq=b_eq if a_eq is not None else None,
        bounds=np.column_stack([low, high]),
        method="highs",
    )
    if res.status == 0:
        return LpResult(status="optimal", objective=float(res.fun), x=np.asarray(res.x))
    if res.status == 2:
        return LpResult(status="infeasible", message=res.message)
    if res.status == 3:
        return LpResult(status="unbounded", message=res.message)
    return LpResult(status="error", message=res.message)


@dataclass(frozen=True)
class BnbLimits:
    gap_tol: float = 0.0
    max_nodes: int | None = None
    time_limit_s: float | None = None


@dataclass
class BnbResult:
    """Outcome of a branch-and-bound run.

    ``objective`` is the incumbent value (evaluator units when an evaluator
    is used).  ``lower_bound`` is clamped to the incumbent so the reported
    gap is never negative.
    """

    status: str  # optimal | gap-limit | node-limit | time-limit | infeasible
    objective: float | None
    lower_bound: float
    gap: float | None
    assignment: dict[int, int] | None
    x: np.ndarray | None
    nodes_explored: int
    incumbent_data: Any = None
    bound_history: list[float] = field(default_factory=list)


def _fractionality(x: np.ndarray, binaries: Sequence[int]) -> tuple[float, int]:
    if not binaries:
        return 0.0, -1
    worst = -1.0
    worst_var = binaries[0]
    for j in binaries:
        f = abs(x[j] - round(x[j]))
        if f > worst + 1e-15:
            worst = f
            worst_var = j
    return worst, worst_var


def branch_and_bound(
    lp: LinearProgram,
    binaries: Sequence[int],
    limits: BnbLimits | None = None,
    incumbent_evaluator: Callable[[dict[int, int], np.ndarray], tuple[float, Any] | None] | None = None,
    warm_start: tuple[float, dict[int, int] | None, Any] | None = None,
) -> BnbResult:
    """Best-bound branch-and-bound over the given binary variables.

    Determinism: node selection breaks bound ties by insertion order and
    branching breaks fractionality ties by lowest variable index, so
    identical inputs yield identical results.
    """
    limits = limits or BnbLimits()
    binaries = sorted(binaries)
    for j in binaries:
        if lp.low[j] != 0.0 or lp.high[j] != 1.0:
            raise ValueError(f"binary variable {lp.names[j]} must be declared with bounds [0, 1]")

    inc_value: float | None = None
    inc_assignment: dict[int, int] | None = None
    inc_x: np.ndarray | None = None
    inc_data: Any = None
    if warm_start is not None:
        inc_value, inc_assignment, inc_data = warm_start

    start = time.monotonic()
    heap: list[tuple[float, int, dict[int, int]]] = [(-np.inf, 0, {})]
    seq = 1
    nodes = 0
    global_lb = -np.inf
    bound_history: list[float] = []
    eval_cache: dict[frozenset, tuple[float, Any] | None] = {}
    status = None

    def prune_eps() -> float:
        return _PRUNE_EPS * max(1.0, abs(inc_value)) if inc_value is not None else 0.0

    def current_gap(lb: float) -> float | None:
        if inc_value is None:
            return None
        lb = min(lb, inc_value)
        return max(0.0, (inc_value - lb) / max(abs(inc_value), 1e-30))

    while heap:
        if limits.max_nodes is not None and nodes >= limits.max_nodes:
            status = "node-limit"
            break
        if limits.time_limit_s is not None and time.monotonic() - start > limits.time_limit_s:
            status = "time-limit"
            break

        bound, _, fixed = heapq.heappop(heap)
        global_lb = max(global_lb, min(bound, inc_value) if inc_value is not None else bound)
        bound_history.append(global_lb)

        if inc_value is not None:
            if bound >= inc_value - prune_eps():
                # Best-bound order: every remaining node is at least this bound.
                global_lb = max(global_lb, inc_value)
                status = "optimal"
                break
            gap = current_gap(bound)
            if gap is not None and gap <= limits.gap_tol:
                status = "optimal" if gap <= 1e-9 else "gap-limit"
                break

        overrides = {j: (float(v), float(v)) for j, v in fixed.items()}
        res = solve_lp(lp, bounds_override=overrides)
        nodes += 1
        if res.status == "infeasible":
            if not fixed:
                # An infeasible root relaxation proves the whole program
                # infeasible; a warm-start claim cannot override that.
                return BnbResult(
                    status="infeasible",
                    objective=None,
                    lower_bound=np.inf,
                    gap=None,
                    assignment=None,
                    x=None,
                    nodes_explored=nodes,
                    bound_history=bound_history,
                )
            continue
        if res.status != "optimal":
            raise RuntimeError(f"LP relaxation failed during branch and bound: {res.status} {res.message}")
        v = res.objective
        node_bound = max(bound, v) if np.isfinite(bound) else v
        if inc_value is not None and v >= inc_value - prune_eps():
            continue

        frac, frac_var = _fractionality(res.x, binaries)
        if frac <= INTEGRALITY_TOL:
            assignment = {j: int(round(res.x[j])) for j in binaries}
            if incumbent_evaluator is None:
                if inc_value is None or v < inc_value:
                    inc_value, inc_assignment, inc_x, inc_data = v, assignment, res.x, None
                continue
            key = frozenset(assignment.items())
            if key in eval_cache:
                outcome = eval_cache[key]
            else:
                outcome = incumbent_evaluator(assignment, res.x)
                eval_cache[key] = outcome
            if outcome is not None:
                val, data = outcome
                if inc_value is None or val < inc_value:
                    inc_value, inc_assignment, inc_x, inc_data = val, assignment, res.x, data
            unfixed = [j for j in binaries if j not in fixed]
            if not unfixed:
                continue
            if inc_value is not None and node_bound >= inc_value - prune_eps():
                continue
            branch_var = unfixed[0]
        else:
            branch_var = frac_var

        for value in (0, 1):
            child = dict(fixed)
            child[branch_var] = value
            heapq.heappush(heap, (node_bound, seq, child))
            seq += 1

    if status is None:
        # Heap exhausted: every node was enumerated or pruned.
        if inc_value is None:
            return BnbResult(
                status="infeasible",
                objective=None,
                lower_bound=np.inf,
                gap=None,
                assignment=None,
                x=None,
                nodes_explored=nodes,
                bound_history=bound_history,
            )
        global_lb = inc_value
        status = "optimal"

    if inc_value is None:
        return BnbResult(
            status=status,
            objective=None,
            lower_bound=global_lb,
            gap=None,
            assignment=None,
            x=None,
            nodes_explored=nodes,
            bound_history=bound_history,
        )

    lb = min(global_lb, inc_value)
    return BnbResult(
        status=status,
        objective=inc_value,
        lower_bound=lb,
        gap=current_gap(lb),
        assignment=inc_assignment,
        x=inc_x,
        nodes_explored=nodes,
        incumbent_data=inc_data,
        bound_history=bound_history,
    )
