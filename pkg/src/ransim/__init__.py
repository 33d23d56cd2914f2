"""Deterministic discrete-event simulator of a slice-based monolithic RAN
(RANF over distributed RUs) with a conventional CU/DU split baseline mode.
"""

from .config import parse_scenario, validate_scenario, config_hash
from .core import ConfigError, ModelError, SimulationError
from .runtime import Runtime, run_scenario

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ModelError",
    "Runtime",
    "SimulationError",
    "config_hash",
    "parse_scenario",
    "run_scenario",
    "validate_scenario",
    "__version__",
]
