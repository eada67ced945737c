"""SINR and rate tables for the two interference phases.

Macros transmit only in non-ABS subframes.  Each pico is split into two
logical sub-eNBs: a cell-centre (CEN) one scheduled in nABS and a
range-extension (CRE) one scheduled in ABS, when macros are silent.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .topology import MACRO, PICO, GainTensor, Topology


class EnbKind(enum.IntEnum):
    MACRO = 0
    PICO_CEN = 1
    PICO_CRE = 2


NABS = "nabs"
ABS = "abs"


@dataclass(frozen=True)
class LogicalEnbIndex:
    """Logical eNBs ordered as all macros, then all pico-CENs, then all pico-CREs."""

    kind: np.ndarray
    physical: np.ndarray

    def __post_init__(self):
        kind = np.asarray(self.kind, dtype=int)
        physical = np.asarray(self.physical, dtype=int)
        kind.setflags(write=False)
        physical.setflags(write=False)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "physical", physical)

    @classmethod
    def from_tiers(cls, tiers) -> "LogicalEnbIndex":
        tiers = np.asarray(tiers)
        macros = np.flatnonzero(tiers == MACRO)
        picos = np.flatnonzero(tiers == PICO)
        kind = np.concatenate(
            [
                np.full(len(macros), EnbKind.MACRO),
                np.full(len(picos), EnbKind.PICO_CEN),
                np.full(len(picos), EnbKind.PICO_CRE),
            ]
        )
        return cls(kind=kind, physical=np.concatenate([macros, picos, picos]))

    @classmethod
    def from_topology(cls, topology: Topology) -> "LogicalEnbIndex":
        return cls.from_tiers(topology.enb_tier)

    def __len__(self) -> int:
        return len(self.kind)

    @property
    def is_macro(self) -> np.ndarray:
        return self.kind == EnbKind.MACRO

    @property
    def is_cen(self) -> np.ndarray:
        return self.kind == EnbKind.PICO_CEN

    @property
    def is_cre(self) -> np.ndarray:
        return self.kind == EnbKind.PICO_CRE

    def sub_enbs(self, pico: int) -> tuple[int, int]:
        """(cen, cre) logical ids of physical pico ``pico``."""
        cen = np.flatnonzero(self.is_cen & (self.physical == pico))
        cre = np.flatnonzero(self.is_cre & (self.physical == pico))
        return int(cen[0]), int(cre[0])

    def kind_names(self) -> list[str]:
        return [EnbKind(k).name.lower() for k in self.kind]


@dataclass(frozen=True)
class RateTable:
    """Spectral efficiencies in bits/s/Hz indexed ``(ue, logical_enb, rb)``."""

    rate_nabs: np.ndarray
    rate_abs: np.ndarray

    def __post_init__(self):
        for name in ("rate_nabs", "rate_abs"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 3:
                raise ValueError(f"{name} must be indexed (ue, enb, rb)")
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError(f"{name} must be finite and non-negative")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.rate_nabs.shape != self.rate_abs.shape:
            raise ValueError("phase tables differ in shape")

    @property
    def num_rbs(self) -> int:
        return self.rate_nabs.shape[2]

    @cached_property
    def avg_rate_nabs(self) -> np.ndarray:
        return self.rate_nabs.mean(axis=2)

    @cached_property
    def avg_rate_abs(self) -> np.ndarray:
        return self.rate_abs.mean(axis=2)

    def association_rates(self, beta: float) -> np.ndarray:
        """Long-term rate ``n * (avg_nabs * (1 - beta) + avg_abs * beta)`` per (ue, enb)."""
        return self.num_rbs * (self.avg_rate_nabs * (1.0 - beta) + self.avg_rate_abs * beta)


def sinr(
    gains: GainTensor, topology: Topology, ue: int, enb: int, rb: int, phase: str
) -> float:
    """SINR of physical eNB ``enb`` at UE ``ue`` on one RB, by explicit summation.

    A macro is muted in ABS, so its ABS-phase SINR is 0.
    """
    g = gains.gains
    power = topology.per_rb_power
    tiers = topology.enb_tier
    if tiers[enb] == MACRO and phase == ABS:
        return 0.0
    interference = topology.noise_power
    for k in range(topology.num_enbs):
        if k == enb:
            continue
        if tiers[k] == MACRO and phase == ABS:
            continue
        interference += power[k] * g[ue, k, rb]
    return float(power[enb] * g[ue, enb, rb] / interference)


def sinr_tensor(gains: GainTensor, topology: Topology) -> tuple[np.ndarray, np.ndarray]:
    """Per-physical-eNB SINR arrays ``(nabs, abs)`` of shape ``(ue, enb, rb)``.

    Interference is summed over the other eNBs directly rather than as
    total-minus-own, which would cancel catastrophically near a dominant server.
    """
    rx = gains.gains * topology.per_rb_power[None, :, None]
    macro = topology.enb_tier == MACRO
    num_enbs = topology.num_enbs
    sinr_nabs = np.empty_like(rx)
    sinr_abs = np.zeros_like(rx)
    for b in range(num_enbs):
        others = np.arange(num_enbs) != b
        interf_all = rx[:, others, :].sum(axis=1)
        sinr_nabs[:, b, :] = rx[:, b, :] / (interf_all + topology.noise_power)
        if not macro[b]:
            interf_pico = rx[:, others & ~macro, :].sum(axis=1)
            sinr_abs[:, b, :] = rx[:, b, :] / (interf_pico + topology.noise_power)
    return sinr_nabs, sinr_abs


def build_rate_table(
    gains: GainTensor, topology: Topology, index: LogicalEnbIndex
) -> RateTable:
    """Shannon rates with each logical eNB kind active in exactly one phase."""
    sinr_nabs, sinr_abs = sinr_tensor(gains, topology)
    phys = index.physical
    rate_nabs = np.log2(1.0 + sinr_nabs[:, phys, :])
    rate_abs = np.log2(1.0 + sinr_abs[:, phys, :])
    rate_nabs[:, index.is_cre, :] = 0.0
    rate_abs[:, ~index.is_cre, :] = 0.0
    return RateTable(rate_nabs=rate_nabs, rate_abs=rate_abs)


def rsrp(gains: GainTensor, topology: Topology) -> np.ndarray:
    """Long-term received power per (ue, physical eNB) in watts; excludes fast fading."""
    return gains.large_scale * topology.per_rb_power[None, :]


def classify_cen_cre(rsrp_w: np.ndarray, tiers) -> np.ndarray:
    """Boolean ``(ue, pico)`` map: True where the UE is in the pico's nominal coverage.

    Nominal coverage means the unbiased pico RSRP is at least the strongest
    macro RSRP; ties count as covered.
    """
    tiers = np.asarray(tiers)
    macro = tiers == MACRO
    pico_rsrp = rsrp_w[:, ~macro]
    if not macro.any():
        return np.ones_like(pico_rsrp, dtype=bool)
    best_macro = rsrp_w[:, macro].max(axis=1)
    return pico_rsrp >= best_macro[:, None]


def eligibility(index: LogicalEnbIndex, cen: np.ndarray) -> np.ndarray:
    """Boolean ``(ue, logical_enb)`` candidate map.

    Every UE may join every macro and, for each pico, exactly one of its two
    sub-eNBs: the CEN one inside nominal coverage, the CRE one outside.
    """
    num_ues = cen.shape[0]
    out = np.zeros((num_ues, len(index)), dtype=bool)
    out[:, index.is_macro] = True
    # columns of `cen` follow ascending physical pico id
    pico_ids = np.unique(index.physical[index.is_cen])
    column = np.searchsorted(pico_ids, index.physical)
    for b in np.flatnonzero(index.is_cen):
        out[:, b] = cen[:, column[b]]
    for b in np.flatnonzero(index.is_cre):
        out[:, b] = ~cen[:, column[b]]
    return out
