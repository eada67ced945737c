"""Block coordinate ascent over association, ABS fraction and RB shares."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..scenario import Scenario
from .abs import optimal_abs
from .association import (
    heuristic_association_step,
    marginal_association_step,
    relaxed_association,
    round_association,
)
from .model import Association, Solution, TraceRow
from .objective import objective
from .schedule import allocate

log = logging.getLogger(__name__)

HEURISTIC = "heuristic"
RELAXED_ROUNDED = "relaxed"


@dataclass(frozen=True)
class BcdOptions:
    max_iters: int = 50
    utility_tol: float = 1e-8
    association: str = HEURISTIC
    schedule: str = "pf"
    heuristic_rule: str = "marginal"
    relaxed_tol: float = 1e-6
    upper_bound: bool = True


def _initial_association(scenario: Scenario) -> Association:
    from ..baselines import max_rsrp_association

    return max_rsrp_association(scenario.rsrp, scenario.tiers, scenario.index)


def bcd_solve(
    scenario: Scenario,
    options: Optional[BcdOptions] = None,
    initial: Optional[Association] = None,
) -> Solution:
    """Cycle association -> ABS fraction -> RB shares until nothing changes.

    Starts from the max-RSRP association with its optimal ABS fraction.  A
    cycle is converged when no UE hands over and the ABS fraction is
    unchanged, or when the utility moves by at most ``utility_tol``
    (relative).  Without convergence the best iterate is returned with
    ``converged=False``.
    """
    opts = options or BcdOptions()
    if opts.association not in (HEURISTIC, RELAXED_ROUNDED):
        raise ValueError(f"unknown association solver {opts.association!r}")
    rates, weights, index = scenario.rates, scenario.weights, scenario.index
    eligible = scenario.eligible

    pf_cache: dict = {}

    def rb_block(assoc, beta):
        alloc = allocate(assoc, beta, rates, weights, index, opts.schedule, cache=pf_cache)
        return alloc, objective(assoc.s, alloc.x, alloc.y, rates, weights)

    assoc = initial if initial is not None else _initial_association(scenario)
    beta = optimal_abs(assoc, weights, index)
    alloc, utility = rb_block(assoc, beta)
    trace = [TraceRow(0, utility, 0, beta)]
    best = (utility, assoc, beta, alloc)
    history = [assoc.s]
    converged = False

    for it in range(1, opts.max_iters + 1):
        if opts.association == HEURISTIC and opts.heuristic_rule == "marginal":
            new_assoc, handovers = marginal_association_step(
                assoc, rates, weights, eligible, index
            )
        elif opts.association == HEURISTIC:
            single = len(history) >= 3 and np.array_equal(history[-1], history[-3])
            new_assoc, handovers = heuristic_association_step(
                assoc, rates.association_rates(beta), weights, eligible, single_move=single
            )
        else:
            relaxed = relaxed_association(
                rates.association_rates(beta), weights, eligible, tol=opts.relaxed_tol
            )
            new_assoc = round_association(relaxed.association)
            handovers = int(np.sum(new_assoc.serving != assoc.serving))

        new_beta = optimal_abs(new_assoc, weights, index)
        alloc, new_utility = rb_block(new_assoc, new_beta)
        trace.append(TraceRow(it, new_utility, handovers, new_beta))
        log.debug("iter %d utility %.6f handovers %d beta %.4f", it, new_utility, handovers, new_beta)

        settled = handovers == 0 and abs(new_beta - beta) <= 1e-9
        flat = abs(new_utility - utility) <= opts.utility_tol * max(1.0, abs(utility))
        assoc, beta, utility = new_assoc, new_beta, new_utility
        history.append(assoc.s)
        if utility > best[0]:
            best = (utility, assoc, beta, alloc)
        if settled or flat:
            converged = True
            break

    if converged:
        best = (utility, assoc, beta, alloc)
    utility, assoc, beta, alloc = best
    upper = None
    if opts.upper_bound:
        upper = relaxed_association(
            rates.association_rates(beta), weights, eligible, tol=opts.relaxed_tol
        ).utility
    return Solution(
        association=assoc,
        beta=beta,
        allocation=alloc,
        utility=utility,
        trace=trace,
        converged=converged,
        upper_bound=upper,
        label="(Heuristic, Optimal, PF)" if opts.association == HEURISTIC else "(NLP, Optimal, PF)",
    )
