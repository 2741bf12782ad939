"""System-power minimization for multi-hop networks on non-contiguous spectrum.

A single-front-end radio that transmits on scattered channels must span the
whole gap between them, and its converter power grows with that span.  This
package jointly picks channel schedules, transmit powers, spectrum spans and
routes to minimize total system power (amplifier plus circuit), via an exact
branch-and-bound solver and a polynomial-time greedy scheduler, with
transmit-power-only baselines for comparison.
"""

from .check import CheckReport, check_solution
from .fixtures import multihop_scenario, single_link_scenario
from .greedy import (
    GreedyError,
    best_channel_min,
    final_optimize,
    greedy_schedule,
    initial_routes,
    interference_check,
    solve_greedy,
    tx_power_min,
)
from .milp import (
    Solution,
    allocate_fixed_schedule,
    breakdown_for,
    build_milp,
    repair_powers,
    solve_bnb,
)
from .power import PRESET_RADIOS, PowerBreakdown, RadioProfile, fit_affine_from_points, node_power, papr_db_worstcase
from .relaxation import build_hull, linearize_span_constraints
from .scenario import (
    Channel,
    GeneratorConfig,
    Link,
    Node,
    Scenario,
    ScenarioError,
    Session,
    WICHITA_CHANNELS,
    generate_scenario,
    load_scenario,
    remap_channel_indices,
    save_scenario,
)
from .solver import BnbLimits, BnbResult, LinearProgram, branch_and_bound, solve_lp
from .span import Schedule, SpanResult, node_spans, span_frequency, span_index

__version__ = "0.1.0"

__all__ = [
    "BnbLimits",
    "BnbResult",
    "Channel",
    "CheckReport",
    "GeneratorConfig",
    "GreedyError",
    "LinearProgram",
    "Link",
    "Node",
    "PRESET_RADIOS",
    "PowerBreakdown",
    "RadioProfile",
    "Scenario",
    "ScenarioError",
    "Schedule",
    "Session",
    "Solution",
    "SpanResult",
    "WICHITA_CHANNELS",
    "allocate_fixed_schedule",
    "best_channel_min",
    "branch_and_bound",
    "breakdown_for",
    "build_hull",
    "build_milp",
    "check_solution",
    "final_optimize",
    "fit_affine_from_points",
    "generate_scenario",
    "greedy_schedule",
    "initial_routes",
    "interference_check",
    "linearize_span_constraints",
    "load_scenario",
    "multihop_scenario",
    "node_power",
    "node_spans",
    "papr_db_worstcase",
    "remap_channel_indices",
    "repair_powers",
    "save_scenario",
    "single_link_scenario",
    "solve_bnb",
    "solve_greedy",
    "solve_lp",
    "span_frequency",
    "span_index",
    "tx_power_min",
]
