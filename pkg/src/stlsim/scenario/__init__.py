"""Scenario configuration, facility presets, pipelines and the command line."""

from .config import ConfigError, ScenarioConfig, config_from_dict, load_config, with_overrides
from .pipeline import run_convergence, run_stl
from .presets import PRESETS, load_preset

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "config_from_dict",
    "load_config",
    "with_overrides",
    "run_convergence",
    "run_stl",
    "PRESETS",
    "load_preset",
]
