"""Reference schemes: RSRP-based association, fixed ABS, PF or round-robin."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError
from .radio import LogicalEnbIndex, classify_cen_cre
from .scenario import Scenario
from .solver.model import Allocation, Association, Solution
from .solver.objective import objective, ue_rates
from .solver.schedule import allocate
from .topology import MACRO

MAX_RSRP = "max_rsrp"
BIASED_RSRP = "biased_rsrp"
PF = "pf"
ROUND_ROBIN = "round_robin"


@dataclass(frozen=True)
class BaselineSpec:
    association: str = MAX_RSRP
    bias_db: float = 0.0
    beta: float = 0.0
    scheduler: str = PF

    def __post_init__(self):
        if self.association not in (MAX_RSRP, BIASED_RSRP):
            raise ValueError(f"unknown association {self.association!r}")
        if self.scheduler not in (PF, ROUND_ROBIN):
            raise ValueError(f"unknown scheduler {self.scheduler!r}")
        if self.bias_db < 0:
            raise ValueError("bias_db must be >= 0")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")

    @property
    def label(self) -> str:
        assoc = "max-RSRP" if self.association == MAX_RSRP else f"CRE {self.bias_db:g}dB"
        sched = "PF" if self.scheduler == PF else "RR"
        return f"({assoc}, {self.beta:g}, {sched})"


def biased_rsrp_association(
    rsrp_w: np.ndarray, tiers, index: LogicalEnbIndex, bias_db: float
) -> Association:
    """Serve each UE from the strongest eNB after adding ``bias_db`` to pico RSRPs.

    A pico win lands on its CEN sub-eNB when the pico is also the unbiased
    winner over all macros, otherwise on its CRE sub-eNB.  Ties go to the
    lowest physical id.
    """
    tiers = np.asarray(tiers)
    pico = tiers != MACRO
    biased = np.array(rsrp_w, dtype=float)
    biased[:, pico] *= 10.0 ** (bias_db / 10.0)
    phys = np.argmax(biased, axis=1)
    cen = classify_cen_cre(rsrp_w, tiers)
    pico_column = np.cumsum(pico) - 1

    macro_logical = {int(p): b for b, p in enumerate(index.physical) if index.is_macro[b]}
    cen_logical = {int(p): b for b, p in enumerate(index.physical) if index.is_cen[b]}
    cre_logical = {int(p): b for b, p in enumerate(index.physical) if index.is_cre[b]}
    serving = np.empty(len(phys), dtype=int)
    for u, p in enumerate(phys):
        if not pico[p]:
            serving[u] = macro_logical[p]
        elif cen[u, pico_column[p]]:
            serving[u] = cen_logical[p]
        else:
            serving[u] = cre_logical[p]
    return Association.from_serving(serving, len(index))


def max_rsrp_association(rsrp_w: np.ndarray, tiers, index: LogicalEnbIndex) -> Association:
    """Serve each UE from the eNB with the highest unbiased RSRP."""
    return biased_rsrp_association(rsrp_w, tiers, index, 0.0)


def round_robin_schedule(num_ues: int, phase_budget: float, num_rbs: int = 1) -> np.ndarray:
    """Equal, weight-blind share ``phase_budget / m`` of every RB for each of ``m`` UEs."""
    if num_ues < 1:
        raise ValueError("round robin needs at least one UE")
    return np.full((num_ues, num_rbs), phase_budget / num_ues)


def round_robin_allocation(association: Association, beta: float, num_rbs: int) -> Allocation:
    s = association.s
    counts = s.sum(axis=0)
    frac = np.divide(s, counts[None, :], out=np.zeros_like(s), where=counts[None, :] > 0)
    x = np.repeat((frac * (1.0 - beta))[:, :, None], num_rbs, axis=2)
    y = np.repeat((frac * beta)[:, :, None], num_rbs, axis=2)
    return Allocation(x=x, y=y)


def evaluate(
    scenario: Scenario, association: Association, beta: float, allocation: Allocation
) -> tuple[float, list]:
    """Utility and the list of starved UEs (utility is ``-inf`` if any)."""
    total = ue_rates(scenario.rates, allocation.x, allocation.y)
    served = total[np.arange(scenario.num_ues), association.serving]
    starved = np.flatnonzero(served <= 0.0).tolist()
    if starved:
        return -np.inf, starved
    return objective(association.s, allocation.x, allocation.y, scenario.rates, scenario.weights), []


def run_baseline(spec: BaselineSpec, scenario: Scenario) -> Solution:
    """Fixed association and ABS fraction, scheduled by PF or round robin.

    UEs pushed onto a pico-CRE while ``beta = 0`` get no ABS resources; they
    are reported in ``Solution.starved`` and the utility is ``-inf``.
    """
    if spec.association == MAX_RSRP:
        assoc = max_rsrp_association(scenario.rsrp, scenario.tiers, scenario.index)
    else:
        assoc = biased_rsrp_association(
            scenario.rsrp, scenario.tiers, scenario.index, spec.bias_db
        )
    if spec.scheduler == PF:
        alloc = allocate(assoc, spec.beta, scenario.rates, scenario.weights, scenario.index, "pf")
    else:
        alloc = round_robin_allocation(assoc, spec.beta, scenario.num_rbs)
    try:
        utility, starved = evaluate(scenario, assoc, spec.beta, alloc)
    except InfeasibleError:  # pragma: no cover - evaluate pre-screens starvation
        utility, starved = -np.inf, []
    return Solution(
        association=assoc,
        beta=spec.beta,
        allocation=alloc,
        utility=utility,
        trace=[],
        converged=True,
        starved=starved,
        label=spec.label,
    )
