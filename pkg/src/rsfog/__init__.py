"""Joint uplink/downlink rate splitting for fog-computing task offloading."""

from .baselines import SchemeKind, solve_cloud, solve_noma, solve_scheme, solve_sdma
from .scenario import SystemConfig, Scenario, build_scenario, load_config
from .solver import AOOptions, Solution, TransmitState, ao_minimize, audit

__all__ = ["SystemConfig", "Scenario", "build_scenario", "load_config",
           "AOOptions", "Solution", "TransmitState", "ao_minimize", "audit",
           "SchemeKind", "solve_scheme", "solve_sdma", "solve_noma", "solve_cloud"]
