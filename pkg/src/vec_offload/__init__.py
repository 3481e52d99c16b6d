"""Heterogeneous vehicular task offloading under stochastic delay bounds."""

from .model import ScenarioConfig, TaskSpec, default_scenario, load_scenario, validate

__all__ = ["ScenarioConfig", "TaskSpec", "default_scenario", "load_scenario", "validate"]
__version__ = "0.1.0"
