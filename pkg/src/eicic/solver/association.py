"""UE association: relaxed convex program and the distributed best-eNB rule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InfeasibleError
from ..radio import LogicalEnbIndex, RateTable
from .abs import optimal_abs
from .model import BINARY, EPS_OMEGA, RELAXED, Association
from .objective import association_objective
from .schedule import project_simplex


def candidate_mask(eligible: np.ndarray, assoc_rates: np.ndarray) -> np.ndarray:
    """Eligible pairs with a strictly positive long-term rate."""
    mask = np.asarray(eligible, dtype=bool) & (assoc_rates > 0.0)
    empty = np.flatnonzero(~mask.any(axis=1))
    if empty.size:
        raise InfeasibleError(f"UEs {empty.tolist()} have no eligible eNB with positive rate")
    return mask


def association_gradient(s, assoc_rates, weights, eligible=None) -> np.ndarray:
    """Partial derivatives of the association utility with respect to ``S_ub``.

    ``w_u * (log(w_u R_ub / Omega_b) - 1)``, with the load floored at
    ``EPS_OMEGA`` and ``-inf`` on ineligible or zero-rate pairs.
    """
    s = np.asarray(s, dtype=float)
    weights = np.asarray(weights, dtype=float)
    loads = np.maximum(s.T @ weights, EPS_OMEGA)
    valid = assoc_rates > 0.0
    if eligible is not None:
        valid &= np.asarray(eligible, dtype=bool)
    with np.errstate(divide="ignore"):
        log_rate = np.log(np.where(valid, weights[:, None] * assoc_rates, 1.0))
    grad = weights[:, None] * (log_rate - np.log(loads)[None, :] - 1.0)
    return np.where(valid, grad, -np.inf)


@dataclass
class RelaxedResult:
    association: Association
    utility: float
    residual: float
    iterations: int


def relaxed_association(
    assoc_rates,
    weights,
    eligible,
    tol: float = 1e-6,
    max_iter: int = 10_000,
) -> RelaxedResult:
    """Maximise the concave association utility over row-stochastic ``S``.

    Projected gradient ascent with Armijo backtracking; each row is projected
    onto the simplex over its candidate eNBs.  The attained value bounds the
    utility of every binary association at the same rates from above.
    """
    assoc_rates = np.asarray(assoc_rates, dtype=float)
    weights = np.asarray(weights, dtype=float)
    mask = candidate_mask(eligible, assoc_rates)
    s = mask / mask.sum(axis=1, keepdims=True)
    value = association_objective(s, assoc_rates, weights)
    step = 1.0
    residual = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        grad = np.where(mask, association_gradient(s, assoc_rates, weights, mask), 0.0)
        residual = float(np.max(np.abs(s - project_simplex(s + grad, 1.0, axis=1, mask=mask))))
        if residual <= tol:
            break
        while True:
            cand = project_simplex(s + step * grad, 1.0, axis=1, mask=mask)
            cand_value = association_objective(cand, assoc_rates, weights)
            gain = np.sum(grad * (cand - s))
            if cand_value >= value + 1e-4 * gain or step < 1e-16:
                break
            step *= 0.5
        if cand_value < value:
            break
        s, value = cand, cand_value
        step = min(step * 2.0, 1e6)
    return RelaxedResult(Association(s, RELAXED), value, residual, it)


def round_association(association: Association) -> Association:
    """Largest entry per row, ties to the lowest eNB id."""
    return Association.from_serving(np.argmax(association.s, axis=1), association.s.shape[1])


def heuristic_association_step(
    association: Association,
    assoc_rates,
    weights,
    eligible,
    single_move: bool = False,
) -> tuple[Association, int]:
    """One synchronous round of the gradient best-eNB rule.

    Every UE moves to the eligible eNB with the largest partial derivative
    of the association utility, all evaluated against the loads broadcast at
    the start of the round.  Ties favour the current server, then the lowest
    id.  With ``single_move`` only the UE with the largest improvement hands
    over.

    Returns the new association and the number of handovers.
    """
    s = association.s
    weights = np.asarray(weights, dtype=float)
    serving = association.serving
    rows = np.arange(len(serving))
    grad = association_gradient(s, assoc_rates, weights, eligible)
    best_value = grad.max(axis=1)
    stay = grad[rows, serving] >= best_value
    best = np.where(stay, serving, np.argmax(grad, axis=1))
    movers = np.flatnonzero(best != serving)
    if single_move and movers.size > 1:
        improvement = best_value[movers] - grad[movers, serving[movers]]
        keep = movers[np.argmax(improvement)]
        best = serving.copy()
        best[keep] = np.argmax(grad[keep])
        movers = np.array([keep])
    return Association.from_serving(best, s.shape[1]), int(movers.size)


def _xlogx(v):
    v = np.asarray(v, dtype=float)
    safe = np.where(v > 0.0, v, 1.0)
    return np.where(v > 0.0, v * np.log(safe), 0.0)


def profiled_utility(association: Association, rates: RateTable, weights, index, beta=None) -> float:
    """Association utility at ``beta``, or at the optimal ABS fraction when ``beta`` is None."""
    if beta is None:
        beta = optimal_abs(association, weights, index)
    return association_objective(association.s, rates.association_rates(beta), weights)


def marginal_scores(
    association: Association,
    rates: RateTable,
    weights,
    eligible,
    index: LogicalEnbIndex,
    beta=None,
) -> np.ndarray:
    """Exact utility of each UE's unilateral move, up to a per-UE constant.

    ``score[u, b] - score[u, serving(u)]`` is the change of the association
    utility if UE ``u`` alone hands over to ``b``.  It is the finite-difference
    counterpart of :func:`association_gradient`: the load term
    ``w (log Omega_b + 1)`` becomes ``phi(Omega_b' + w) - phi(Omega_b')``
    with ``phi(t) = t log t`` and ``Omega_b'`` the load without ``u``.

    With ``beta=None`` the ABS fraction is re-optimised for every move, which
    adds ``phi`` increments of the CRE and non-CRE weight totals.  An empty
    eNB or an empty ABS phase then has a finite, exact score.
    """
    weights = np.asarray(weights, dtype=float)
    s = association.s
    w = weights[:, None]
    loads = s.T @ weights
    if beta is None:
        n = rates.num_rbs
        table = n * np.where(index.is_cre[None, :], rates.avg_rate_abs, rates.avg_rate_nabs)
    else:
        table = rates.association_rates(beta)
    valid = np.asarray(eligible, dtype=bool) & (table > 0.0)
    without = loads[None, :] - w * s
    score = -(_xlogx(without + w) - _xlogx(without))
    if beta is None:
        in_cre = index.is_cre[association.serving]
        cre_total = loads[index.is_cre].sum() - weights * in_cre
        other_total = loads[~index.is_cre].sum() - weights * ~in_cre
        join_cre = _xlogx(cre_total + weights) - _xlogx(cre_total)
        join_other = _xlogx(other_total + weights) - _xlogx(other_total)
        score += np.where(index.is_cre[None, :], join_cre[:, None], join_other[:, None])
    with np.errstate(divide="ignore"):
        score += w * np.log(np.where(valid, w * table, 1.0))
    return np.where(valid, score, -np.inf)


def marginal_association_step(
    association: Association,
    rates: RateTable,
    weights,
    eligible,
    index: LogicalEnbIndex,
    beta=None,
) -> tuple[Association, int]:
    """Synchronous best-eNB round scored by exact move utilities.

    Every UE picks its best eNB from :func:`marginal_scores`, computed once
    from the loads at the start of the round (ties keep the current server,
    then the lowest id).  If executing all handovers together does not raise
    the utility, only the half of the movers with the largest individual
    gains is kept, and so on down to the single best mover.  A single best
    mover always raises the utility, so repeated rounds terminate.
    """
    serving = association.serving
    rows = np.arange(len(serving))
    score = marginal_scores(association, rates, weights, eligible, index, beta)
    current = score[rows, serving]
    best_value = score.max(axis=1)
    target = np.where(current >= best_value, serving, np.argmax(score, axis=1))
    movers = np.flatnonzero(target != serving)
    if movers.size == 0:
        return association, 0
    gain = best_value[movers] - current[movers]
    order = movers[np.argsort(-gain, kind="stable")]
    before = profiled_utility(association, rates, weights, index, beta)
    k = len(order)
    while True:
        new = serving.copy()
        new[order[:k]] = target[order[:k]]
        candidate = Association.from_serving(new, score.shape[1])
        if k == 1 or profiled_utility(candidate, rates, weights, index, beta) > before:
            return candidate, k
        k = (k + 1) // 2


def association_fixed_point(
    association: Association,
    rates: RateTable,
    weights,
    eligible,
    index: LogicalEnbIndex,
    beta=None,
    rule: str = "marginal",
    max_steps: int = 1000,
) -> tuple[Association, int, bool]:
    """Repeat best-eNB rounds until no UE moves.

    ``rule="marginal"`` uses :func:`marginal_association_step` (``beta=None``
    re-optimises the ABS fraction).  ``rule="gradient"`` needs a fixed
    ``beta`` and switches to a single move after a two-cycle.  Returns the
    final association, the number of rounds and whether it is a fixed point.
    """
    if rule == "gradient" and beta is None:
        raise ValueError("the gradient rule needs a fixed beta")
    assoc_rates = None if beta is None else rates.association_rates(beta)
    history = [association.s]
    for step in range(1, max_steps + 1):
        if rule == "marginal":
            association, moved = marginal_association_step(
                association, rates, weights, eligible, index, beta
            )
        elif rule == "gradient":
            single = len(history) >= 3 and np.array_equal(history[-1], history[-3])
            association, moved = heuristic_association_step(
                association, assoc_rates, weights, eligible, single_move=single
            )
        else:
            raise ValueError(f"unknown association rule {rule!r}")
        if moved == 0:
            return association, step, True
        history.append(association.s)
    return association, max_steps, False
