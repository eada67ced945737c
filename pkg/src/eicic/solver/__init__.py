"""Joint association / ABS / RB allocation solvers."""

from .abs import optimal_abs, reduced_abs_objective
from .association import (
    association_fixed_point,
    association_gradient,
    heuristic_association_step,
    marginal_association_step,
    marginal_scores,
    relaxed_association,
    round_association,
)
from .bcd import BcdOptions, bcd_solve
from .enumerate import enumerate_optimum
from .model import EPS_BETA, EPS_OMEGA, Allocation, Association, Solution
from .objective import association_objective, objective
from .schedule import allocate, closed_form_allocation, pf_schedule, project_simplex

__all__ = [
    "Allocation",
    "Association",
    "BcdOptions",
    "EPS_BETA",
    "EPS_OMEGA",
    "Solution",
    "allocate",
    "association_fixed_point",
    "association_gradient",
    "association_objective",
    "bcd_solve",
    "closed_form_allocation",
    "enumerate_optimum",
    "heuristic_association_step",
    "marginal_association_step",
    "marginal_scores",
    "objective",
    "optimal_abs",
    "pf_schedule",
    "project_simplex",
    "reduced_abs_objective",
    "relaxed_association",
    "round_association",
]
