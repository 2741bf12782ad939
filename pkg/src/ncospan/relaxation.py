"""Linear outer approximation of the log-capacity curve and span encoding.

``ln(1 + s)`` over an SNR window [s_low, s_high] is replaced by its convex
hull: three tangential supports (at the window edges and at an interior
point beta where the edge tangents cross the curve region evenly) bounding
the curve from above, plus the chord between the window endpoints bounding
it from below.  Any point on the curve satisfies all four inequalities, so
substituting the hull for the curve relaxes the feasible region without
cutting off true solutions.

The span constraints couple a node's span variable to its channel-activity
indicators linearly over remapped integer channel indices, one inequality
per ordered index pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

__all__ = ["HullRow", "HullSegments", "build_hull", "SpanInequality", "linearize_span_constraints"]


@dataclass(frozen=True)
class HullRow:
    """coef_c * c + coef_s * s (sense) rhs, with c in natural-log capacity units."""

    coef_c: float
    coef_s: float
    rhs: float
    sense: str  # "<=" or ">="

    def holds(self, c: float, s: float, tol: float = 0.0) -> bool:
        lhs = self.coef_c * c + self.coef_s * s
        if self.sense == "<=":
            return lhs <= self.rhs + tol
        return lhs >= self.rhs - tol


@dataclass(frozen=True)
class HullSegments:
    s_low: float
    s_high: float
    beta: float
    rows: tuple[HullRow, HullRow, HullRow, HullRow]

    def contains(self, c: float, s: float, tol: float = 0.0) -> bool:
        return all(row.holds(c, s, tol) for row in self.rows)


def _tangent_row(at: float) -> HullRow:
    # Tangent to ln(1+s) at s=at, written as (1+at)*c - s <= (1+at)*(ln(1+at)-1)+1.
    return HullRow(
        coef_c=1.0 + at,
        coef_s=-1.0,
        rhs=(1.0 + at) * (math.log1p(at) - 1.0) + 1.0,
        sense="<=",
    )


def build_hull(s_low: float, s_high: float) -> HullSegments:
    """Four-segment hull of ln(1+s) on [s_low, s_high].

    Segments I-III are tangents at s_low, beta and s_high (upper bounds);
    segment IV is the chord joining the endpoint curve points (lower bound,
    exact at both endpoints).
    """
    if s_low < 0:
        raise ValueError("SNR lower bound must be non-negative")
    if not s_high > s_low:
        raise ValueError("SNR upper bound must exceed the lower bound")
    if not math.isfinite(s_high) or s_high > 1e300:
        raise ValueError("SNR upper bound too large to linearize")

    c_low = math.log1p(s_low)
    c_high = math.log1p(s_high)
    beta = (1.0 + s_low) * (1.0 + s_high) * (c_high - c_low) / (s_high - s_low) - 1.0

    chord = HullRow(
        coef_c=s_high - s_low,
        coef_s=-(c_high - c_low),
        rhs=s_high * c_low - s_low * c_high,
        sense=">=",
    )
    return HullSegments(
        s_low=s_low,
        s_high=s_high,
        beta=beta,
        rows=(_tangent_row(s_low), _tangent_row(beta), _tangent_row(s_high), chord),
    )


@dataclass(frozen=True)
class SpanInequality:
    """q + sum(coef[m] * x[m]) >= rhs, with x keyed by remapped channel index."""

    x_coeffs: dict[int, float]
    rhs: float


def linearize_span_constraints(indices: Sequence[int], guard_count: int, width_hz: float) -> list[SpanInequality]:
    """Linear lower bounds tying a span variable to activity indicators.

    One inequality per ordered pair (m1, m2) of available indices; the guard
    constant stands in for inactive channels when taking the minimum index.
    For any 0/1 activity assignment, the smallest q satisfying all rows is
    exactly the index span of the active set (0 when nothing is active, with
    q >= 0 supplied by the variable bound).
    """
    if len(set(indices)) != len(indices):
        raise ValueError("remapped indices must be distinct")
    if any(m > guard_count for m in indices):
        raise ValueError("guard constant must dominate every usable index")
    rows = []
    for m1 in indices:
        for m2 in indices:
            coeffs: dict[int, float] = {}
            # q + W*(m2*x2 + guard*(1-x2)) >= W*(m1*x1 + 1)
            coeffs[m2] = coeffs.get(m2, 0.0) + width_hz * (m2 - guard_count)
            coeffs[m1] = coeffs.get(m1, 0.0) - width_hz * m1
            rows.append(SpanInequality(x_coeffs=coeffs, rhs=width_hz * (1.0 - guard_count)))
    return rows


def min_span_for_activity(rows: Sequence[SpanInequality], active: set[int]) -> float:
    """Smallest q satisfying the rows for a 0/1 activity set (floor 0)."""
    q = 0.0
    for row in rows:
        lhs = sum(coef for m, coef in row.x_coeffs.items() if m in active)
        q = max(q, row.rhs - lhs)
    return q
