"""Joint UE association, ABS and RB allocation for two-tier LTE HetNets."""

from .scenario import Scenario, build_scenario
from .topology import NetworkConfig

__version__ = "0.1.0"

__all__ = ["NetworkConfig", "Scenario", "build_scenario", "__version__"]
