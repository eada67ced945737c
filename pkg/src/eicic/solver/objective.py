"""Weighted log-utility objectives."""

from __future__ import annotations

import numpy as np

from ..errors import InfeasibleError
from ..radio import RateTable


def ue_rates(rates: RateTable, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Aggregate spectral efficiency ``sum_r R^nABS x + R^ABS y`` per (ue, enb)."""
    return np.einsum("ubr,ubr->ub", rates.rate_nabs, x) + np.einsum(
        "ubr,ubr->ub", rates.rate_abs, y
    )


def objective(s: np.ndarray, x: np.ndarray, y: np.ndarray, rates: RateTable, weights) -> float:
    """Joint utility ``sum_{u,b} S_ub w_u log(sum_r R^nABS x + R^ABS y)``.

    Terms with ``S_ub = 0`` contribute nothing.  Raises :class:`InfeasibleError`
    if an associated UE gets zero aggregate rate.
    """
    weights = np.asarray(weights, dtype=float)
    total = ue_rates(rates, x, y)
    u, b = np.nonzero(s)
    served = total[u, b]
    if np.any(served <= 0.0):
        starved = sorted(set(u[served <= 0.0].tolist()))
        raise InfeasibleError(f"UEs {starved} have zero rate on their serving eNB")
    return float(np.sum(s[u, b] * weights[u] * np.log(served)))


def association_objective(s: np.ndarray, assoc_rates: np.ndarray, weights) -> float:
    """Association utility ``sum S_ub w_u log(w_u R_ub / Omega_b)`` with closed-form shares.

    Returns ``-inf`` when mass sits on a zero-rate pair.
    """
    weights = np.asarray(weights, dtype=float)
    s = np.asarray(s, dtype=float)
    loads = s.T @ weights
    u, b = np.nonzero(s)
    r = assoc_rates[u, b]
    if np.any(r <= 0.0):
        return -np.inf
    w = weights[u]
    return float(np.sum(s[u, b] * w * (np.log(w * r) - np.log(loads[b]))))
