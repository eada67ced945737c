"""Optimal ABS fraction for a fixed binary association."""

from __future__ import annotations

import numpy as np

from ..radio import LogicalEnbIndex, RateTable
from .model import EPS_BETA, Association


def optimal_abs(association: Association, weights, index: LogicalEnbIndex) -> float:
    """Weight fraction of UEs attached to pico-CRE sub-eNBs.

    Clamped to ``[EPS_BETA, 1 - EPS_BETA]`` when both the CRE and the non-CRE
    side carry UEs; exactly 0 (or 1) when one side is empty.
    """
    weights = np.asarray(weights, dtype=float)
    loads = association.loads(weights)
    cre = float(loads[index.is_cre].sum())
    other = float(loads[~index.is_cre].sum())
    beta = cre / (cre + other)
    if cre > 0.0 and other > 0.0:
        beta = min(max(beta, EPS_BETA), 1.0 - EPS_BETA)
    return beta


def reduced_abs_objective(
    beta: float,
    association: Association,
    rates: RateTable,
    weights,
    index: LogicalEnbIndex,
) -> float:
    """Joint utility as a function of ``beta`` alone, with closed-form shares.

    nABS-served UEs contribute ``w log(n w R^nABS (1 - beta) / Omega_b)`` and
    CRE UEs ``w log(n w R^ABS beta / Omega_b)``.
    """
    weights = np.asarray(weights, dtype=float)
    n = rates.num_rbs
    serving = association.serving
    loads = association.loads(weights)[serving]
    ues = np.arange(len(serving))
    cre = index.is_cre[serving]
    with np.errstate(divide="ignore"):
        nabs = np.log(n * weights * rates.avg_rate_nabs[ues, serving] * (1.0 - beta) / loads)
        abs_ = np.log(n * weights * rates.avg_rate_abs[ues, serving] * beta / loads)
    return float(np.sum(weights * np.where(cre, abs_, nabs)))
