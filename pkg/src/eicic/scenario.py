"""A solvable instance: logical eNBs, rates, weights and candidate sets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .radio import (
    LogicalEnbIndex,
    RateTable,
    build_rate_table,
    classify_cen_cre,
    eligibility,
    rsrp,
)
from .topology import GainTensor, NetworkConfig, Topology, build_gain_tensor, generate_layout


@dataclass(frozen=True)
class Scenario:
    index: LogicalEnbIndex
    rates: RateTable
    weights: np.ndarray
    eligible: np.ndarray
    rsrp: np.ndarray
    tiers: np.ndarray
    topology: Optional[Topology] = None
    gains: Optional[GainTensor] = None
    config: Optional[NetworkConfig] = None

    @property
    def num_ues(self) -> int:
        return len(self.weights)

    @property
    def num_enbs(self) -> int:
        return len(self.index)

    @property
    def num_rbs(self) -> int:
        return self.rates.num_rbs

    @property
    def rb_bandwidth(self) -> float:
        return self.topology.rb_bandwidth if self.topology is not None else 1.0

    @classmethod
    def from_topology(
        cls,
        topology: Topology,
        gains: GainTensor,
        config: Optional[NetworkConfig] = None,
    ) -> "Scenario":
        index = LogicalEnbIndex.from_topology(topology)
        rx = rsrp(gains, topology)
        cen = classify_cen_cre(rx, topology.enb_tier)
        return cls(
            index=index,
            rates=build_rate_table(gains, topology, index),
            weights=np.asarray(topology.ue_weight, dtype=float),
            eligible=eligibility(index, cen),
            rsrp=rx,
            tiers=np.asarray(topology.enb_tier),
            topology=topology,
            gains=gains,
            config=config,
        )

    @classmethod
    def from_rates(
        cls,
        index: LogicalEnbIndex,
        rates: RateTable,
        weights,
        rsrp_w: np.ndarray,
        tiers,
    ) -> "Scenario":
        """Instance from hand-made rate tables; eligibility still follows RSRP."""
        tiers = np.asarray(tiers)
        cen = classify_cen_cre(rsrp_w, tiers)
        return cls(
            index=index,
            rates=rates,
            weights=np.asarray(weights, dtype=float),
            eligible=eligibility(index, cen),
            rsrp=np.asarray(rsrp_w, dtype=float),
            tiers=tiers,
        )


def build_scenario(config: NetworkConfig) -> Scenario:
    topology = generate_layout(config)
    gains = build_gain_tensor(topology, config)
    return Scenario.from_topology(topology, gains, config)
