"""Exhaustive search over binary associations for small instances."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import EnumerationTooLarge, InfeasibleError
from ..radio import LogicalEnbIndex, RateTable
from .abs import optimal_abs
from .model import Association
from .objective import association_objective

MAX_STATES = 10**6


@dataclass
class EnumerationResult:
    association: Association
    beta: float
    utility: float
    optima: list


def enumerate_optimum(
    rates: RateTable,
    weights,
    eligible,
    index: LogicalEnbIndex,
    beta: Optional[float] = None,
    atol: float = 1e-12,
) -> EnumerationResult:
    """Best binary association by brute force.

    Each candidate gets closed-form shares and, when ``beta`` is None, its
    own optimal ABS fraction.  ``optima`` lists every association within
    ``atol`` of the best utility.
    """
    weights = np.asarray(weights, dtype=float)
    eligible = np.asarray(eligible, dtype=bool)
    choices = [np.flatnonzero(row) for row in eligible]
    states = int(np.prod([len(c) for c in choices], dtype=float))
    if states > MAX_STATES:
        raise EnumerationTooLarge(f"{states} associations exceed the {MAX_STATES} limit")
    num_enbs = eligible.shape[1]
    fixed = None if beta is None else rates.association_rates(beta)

    scored = []
    for serving in itertools.product(*choices):
        assoc = Association.from_serving(serving, num_enbs)
        b = optimal_abs(assoc, weights, index) if beta is None else beta
        table = fixed if fixed is not None else rates.association_rates(b)
        value = association_objective(assoc.s, table, weights)
        scored.append((value, assoc, b))
    best_value = max(v for v, _, _ in scored)
    if not np.isfinite(best_value):
        raise InfeasibleError("no association gives every UE a positive rate")
    optima = [(a, b) for v, a, b in scored if v >= best_value - atol]
    assoc, b = optima[0]
    return EnumerationResult(assoc, b, best_value, optima)
