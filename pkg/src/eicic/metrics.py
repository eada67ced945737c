"""Evaluation quantities: throughput, fairness, CDF, per-tier load and utility."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .radio import LogicalEnbIndex, RateTable
from .solver.model import Association, Solution
from .solver.objective import ue_rates


@dataclass
class MetricsReport:
    per_ue_throughput: np.ndarray
    jain_index: float
    cdf_points: list
    per_tier_load: tuple
    system_utility: float
    per_tier_utility: tuple
    beta: float


def ue_throughput(solution: Solution, rates: RateTable, rb_bandwidth: float) -> np.ndarray:
    """Long-term throughput in bits/s of every UE on its serving eNB."""
    s = solution.association.s
    per_pair = ue_rates(rates, solution.allocation.x, solution.allocation.y)
    return rb_bandwidth * np.sum(s * per_pair, axis=1)


def jain_index(throughputs) -> float:
    """``(sum T)^2 / (N sum T^2)``."""
    t = np.asarray(throughputs, dtype=float)
    if t.size == 0 or np.any(t < 0):
        raise ValueError("throughputs must be a non-empty, non-negative sequence")
    sq = np.sum(t * t)
    if sq == 0.0:
        raise ValueError("Jain index undefined when every throughput is zero")
    return float(np.sum(t) ** 2 / (t.size * sq))


def throughput_cdf(throughputs) -> list[tuple[float, float]]:
    """Empirical CDF as (value, fraction <= value) at each distinct sorted value."""
    t = np.sort(np.asarray(throughputs, dtype=float))
    if t.size == 0:
        raise ValueError("empty throughput sample")
    values, counts = np.unique(t, return_counts=True)
    fractions = np.cumsum(counts) / t.size
    fractions[-1] = 1.0
    return [(float(v), float(f)) for v, f in zip(values, fractions)]


def physical_counts(association: Association, index: LogicalEnbIndex):
    """UE counts per macro and per physical pico (CEN and CRE merged)."""
    per_logical = association.s.sum(axis=0)
    macros = per_logical[index.is_macro]
    pico_ids = np.unique(index.physical[~index.is_macro])
    picos = np.array(
        [per_logical[(index.physical == p) & ~index.is_macro].sum() for p in pico_ids]
    )
    return macros, picos


def per_tier_load(association: Association, index: LogicalEnbIndex) -> tuple[float, float]:
    """Average number of UEs per macro and per pico."""
    macros, picos = physical_counts(association, index)
    macro_avg = float(macros.mean()) if macros.size else 0.0
    pico_avg = float(picos.mean()) if picos.size else 0.0
    return macro_avg, pico_avg


def utility_terms(solution: Solution, rates: RateTable, weights) -> np.ndarray:
    """Per-UE utility ``w_u log(sum_r R x + R y)``; ``-inf`` for starved UEs."""
    s = solution.association.s
    per_pair = ue_rates(rates, solution.allocation.x, solution.allocation.y)
    served = np.sum(s * per_pair, axis=1)
    with np.errstate(divide="ignore"):
        return np.asarray(weights, dtype=float) * np.log(served)


def per_tier_utility(solution: Solution, rates: RateTable, weights, index: LogicalEnbIndex):
    """Sum of utility terms of macro-served and of pico-served UEs."""
    terms = utility_terms(solution, rates, weights)
    macro = index.is_macro[solution.association.serving]
    return float(np.sum(terms[macro])), float(np.sum(terms[~macro]))


def metrics_report(solution: Solution, scenario) -> MetricsReport:
    rates, weights, index = scenario.rates, scenario.weights, scenario.index
    thr = ue_throughput(solution, rates, scenario.rb_bandwidth)
    return MetricsReport(
        per_ue_throughput=thr,
        jain_index=jain_index(thr),
        cdf_points=throughput_cdf(thr),
        per_tier_load=per_tier_load(solution.association, index),
        system_utility=float(np.sum(utility_terms(solution, rates, weights))),
        per_tier_utility=per_tier_utility(solution, rates, weights, index),
        beta=solution.beta,
    )
