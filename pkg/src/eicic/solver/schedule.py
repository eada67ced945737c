"""Per-eNB RB allocation: closed-form shares and a numeric PF solver."""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..errors import InfeasibleError
from ..radio import LogicalEnbIndex, RateTable
from .model import Allocation, Association

FLAT_SPREAD = 1e-9


def project_simplex(v: np.ndarray, z=1.0, axis: int = 1, mask=None) -> np.ndarray:
    """Euclidean projection of each row (``axis=1``) or column onto ``{p >= 0, sum p = z}``.

    Entries where ``mask`` is False are pinned to zero.
    """
    v = np.asarray(v, dtype=float)
    if axis == 0:
        return project_simplex(v.T, z, 1, None if mask is None else np.asarray(mask).T).T
    mask = np.ones_like(v, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    z = np.broadcast_to(np.asarray(z, dtype=float), (v.shape[0],))
    vm = np.where(mask, v, -np.inf)
    order = np.argsort(-vm, axis=1, kind="stable")
    u = np.take_along_axis(vm, order, axis=1)
    valid = np.take_along_axis(mask, order, axis=1)
    with np.errstate(invalid="ignore"):
        cssv = np.cumsum(np.where(valid, u, 0.0), axis=1) - z[:, None]
        ind = np.arange(1, v.shape[1] + 1)
        cond = valid & (u - cssv / ind > 0)
    rho = np.count_nonzero(cond, axis=1)
    if np.any(rho == 0):
        raise ValueError("projection onto an empty support")
    theta = cssv[np.arange(v.shape[0]), rho - 1] / rho
    return np.where(mask, np.maximum(v - theta[:, None], 0.0), 0.0)


def _pf_utility(rates, weights, shares) -> float:
    total = np.sum(rates * shares, axis=1)
    if np.any(total <= 0.0):
        return -np.inf
    return float(np.sum(weights * np.log(total)))


def pf_schedule(
    enb_rates,
    ue_weights,
    phase_budget: float,
    tol: float = 1e-8,
    max_iter: int = 20_000,
) -> np.ndarray:
    """Proportional-fair shares for the UEs of one eNB in one phase.

    Maximises ``sum_u w_u log(sum_r R_ur s_ur)`` subject to
    ``sum_u s_ur = phase_budget`` for every RB.  The optimum does not change
    when a UE's rates or all weights are rescaled, and it scales linearly
    with the budget, so the solver works on rates divided by each UE's peak,
    weights summing to one and a unit budget.  One proportional-response
    update from the equal split gives the starting point, then projected
    gradient ascent with backtracking runs until the projected-gradient
    residual ``max|s - P(s + grad)|`` of that normalised program drops to
    ``tol``.

    Returns an array shaped like ``enb_rates`` (ue, rb).
    """
    rates = np.atleast_2d(np.asarray(enb_rates, dtype=float))
    weights = np.asarray(ue_weights, dtype=float)
    m, n = rates.shape
    if not 0.0 < phase_budget <= 1.0:
        raise ValueError(f"phase_budget must lie in (0, 1], got {phase_budget}")
    if m == 0:
        raise ValueError("no UEs attached")
    peak = rates.max(axis=1)
    if np.any(peak <= 0.0):
        raise InfeasibleError("a UE has zero rate on every RB of this phase")
    if m == 1:
        return np.full((m, n), float(phase_budget))
    return phase_budget * _pf_unit(rates / peak[:, None], weights / weights.sum(), tol, max_iter)


def _pf_gradient(rates, weights, shares) -> np.ndarray:
    return (weights / np.sum(rates * shares, axis=1))[:, None] * rates


def _proportional_response(rates, weights, shares) -> np.ndarray:
    """Each UE bids its weight across RBs in proportion to the rate it gets there."""
    bids = _pf_gradient(rates, weights, shares) * shares
    return bids / bids.sum(axis=0, keepdims=True)


def _pf_unit(rates, weights, tol, max_iter) -> np.ndarray:
    m, n = rates.shape
    shares = _proportional_response(rates, weights, np.full((m, n), 1.0 / m))
    value = _pf_utility(rates, weights, shares)
    grad = _pf_gradient(rates, weights, shares)
    step = 1.0
    for _ in range(max_iter):
        residual = np.max(np.abs(shares - project_simplex(shares + grad, 1.0, axis=0)))
        if residual <= tol:
            break
        while True:
            cand = project_simplex(shares + step * grad, 1.0, axis=0)
            cand_value = _pf_utility(rates, weights, cand)
            direction = cand - shares
            gain = np.sum(grad * direction)
            if cand_value >= value + 1e-4 * gain:
                break
            # near the optimum utility differences drown in rounding, so judge
            # the step by the trapezoid estimate built from both end gradients
            if np.isfinite(cand_value) and gain <= 1e-10 * (1.0 + abs(value)):
                slope = np.sum(_pf_gradient(rates, weights, cand) * direction)
                if 0.5 * (gain + slope) >= 1e-4 * gain:
                    break
            step *= 0.5
            if step < 1e-16:
                return shares
        shares, value = cand, cand_value
        grad = _pf_gradient(rates, weights, shares)
        step = min(step * 2.0, 1e6)
    return shares


def closed_form_allocation(
    association: Association, beta: float, weights, num_rbs: int
) -> Allocation:
    """Weight-proportional shares ``w_u (1 - beta) / Omega_b`` and ``w_u beta / Omega_b``.

    Optimal whenever each UE's rate is the same on every RB.  Empty eNBs get
    no shares.
    """
    weights = np.asarray(weights, dtype=float)
    s = association.s
    loads = s.T @ weights
    frac = np.divide(
        s * weights[:, None], loads[None, :], out=np.zeros_like(s), where=loads[None, :] > 0
    )
    x = np.repeat((frac * (1.0 - beta))[:, :, None], num_rbs, axis=2)
    y = np.repeat((frac * beta)[:, :, None], num_rbs, axis=2)
    return Allocation(x=x, y=y)


def is_flat(rates: np.ndarray) -> bool:
    """True when every row of ``rates`` is constant across RBs (relative spread <= 1e-9)."""
    hi = rates.max(axis=-1)
    lo = rates.min(axis=-1)
    return bool(np.all(hi - lo <= FLAT_SPREAD * np.maximum(np.abs(hi), 1e-300)))


def allocate(
    association: Association,
    beta: float,
    rates: RateTable,
    weights,
    index: LogicalEnbIndex,
    method: str = "pf",
    tol: float = 1e-6,
    cache: Optional[dict] = None,
) -> Allocation:
    """RB block for a binary association.

    The active phase of each non-empty eNB (nABS for macros and pico-CENs,
    ABS for pico-CREs) is scheduled with ``method``: ``"closed"`` uses the
    weight-proportional shares, ``"pf"`` solves the per-RB PF program (and
    falls back to the closed form when the eNB's rates are flat).  The
    inactive phase carries weight-proportional shares at zero rate so that
    both per-RB budgets hold.  An active phase with zero budget leaves its
    UEs with zero shares.

    PF shares scale linearly with the phase budget, so ``cache`` (a dict the
    caller keeps across calls on one scenario) stores budget-normalised
    shares per (eNB, member set) and skips re-solving unchanged eNBs.
    """
    weights = np.asarray(weights, dtype=float)
    alloc = closed_form_allocation(association, beta, weights, rates.num_rbs)
    if method == "closed":
        return alloc
    if method != "pf":
        raise ValueError(f"unknown schedule method {method!r}")
    x, y = np.array(alloc.x), np.array(alloc.y)
    serving = association.serving
    for b in range(len(index)):
        members = np.flatnonzero(serving == b)
        if members.size == 0:
            continue
        if index.is_cre[b]:
            table, shares, budget = rates.rate_abs, y, beta
        else:
            table, shares, budget = rates.rate_nabs, x, 1.0 - beta
        enb_rates = table[members, b, :]
        if budget <= 0.0 or is_flat(enb_rates):
            continue
        key = (b, members.tobytes())
        if cache is not None and key in cache:
            unit = cache[key]
        else:
            unit = pf_schedule(enb_rates, weights[members], 1.0, tol=tol)
            if cache is not None:
                cache[key] = unit
        shares[members, b, :] = unit * budget
    return Allocation(x=x, y=y)
