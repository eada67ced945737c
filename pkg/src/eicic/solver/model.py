"""Decision-variable containers and feasibility checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

# Lower/upper clamp of the ABS fraction when both phases carry UEs.
EPS_BETA = 1e-6
# Floor on eNB load when taking log(R / load) for an empty eNB.
EPS_OMEGA = 1e-12

BINARY = "binary"
RELAXED = "relaxed"


@dataclass(frozen=True)
class Association:
    s: np.ndarray
    mode: str = BINARY

    def __post_init__(self):
        s = np.array(self.s, dtype=float)
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    @classmethod
    def from_serving(cls, serving, num_enbs: int) -> "Association":
        serving = np.asarray(serving, dtype=int)
        s = np.zeros((len(serving), num_enbs))
        s[np.arange(len(serving)), serving] = 1.0
        return cls(s, BINARY)

    @property
    def serving(self) -> np.ndarray:
        """Index of the largest entry per row (the serving eNB for binary S)."""
        return np.argmax(self.s, axis=1)

    def loads(self, weights) -> np.ndarray:
        """Weighted load per eNB, ``sum_u S_ub w_u``."""
        return self.s.T @ np.asarray(weights, dtype=float)

    def check(self, eligible: Optional[np.ndarray] = None, tol: float = 1e-9) -> None:
        s = self.s
        if self.mode == BINARY:
            if not np.all((s == 0.0) | (s == 1.0)):
                raise ValueError("binary association has fractional entries")
            if not np.all(s.sum(axis=1) == 1.0):
                raise ValueError("every UE must be served by exactly one eNB")
        else:
            if np.any(s < -tol) or np.any(s > 1 + tol):
                raise ValueError("association entries outside [0, 1]")
            if np.max(np.abs(s.sum(axis=1) - 1.0)) > tol:
                raise ValueError("association rows must sum to 1")
        if eligible is not None and np.any(s[~eligible] != 0.0):
            raise ValueError("UE associated with an ineligible eNB")


@dataclass(frozen=True)
class Allocation:
    """Per-phase RB shares, ``x`` for nABS and ``y`` for ABS, indexed (ue, enb, rb)."""

    x: np.ndarray
    y: np.ndarray

    def check(self, association: Association, beta: float, tol: float = 1e-9) -> None:
        """Per-RB budgets on every non-empty eNB, and ``0 <= share <= S_ub``."""
        s = association.s
        for name, shares, budget in (("x", self.x, 1.0 - beta), ("y", self.y, beta)):
            if np.any(shares < 0.0):
                raise ValueError(f"negative {name} share")
            if np.any(shares > s[:, :, None]):
                raise ValueError(f"{name} share exceeds association indicator")
            nonempty = s.sum(axis=0) > 0
            sums = shares.sum(axis=0)[nonempty]
            if sums.size and np.max(np.abs(sums - budget)) > tol:
                raise ValueError(f"{name} shares do not sum to the phase budget")


@dataclass
class TraceRow:
    iteration: int
    utility: float
    handovers: int
    beta: float


@dataclass
class Solution:
    association: Association
    beta: float
    allocation: Allocation
    utility: float
    trace: list = field(default_factory=list)
    converged: bool = True
    upper_bound: Optional[float] = None
    starved: list = field(default_factory=list)
    label: str = ""

    def check(self, eligible: Optional[np.ndarray] = None) -> None:
        self.association.check(eligible)
        self.allocation.check(self.association, self.beta)
