"""Configuration, CLI, Monte Carlo runner and report writers."""

from .config import ExperimentConfig, build_model, load_config, parse_config
from .montecarlo import RateReport, run_montecarlo, true_targets

__all__ = ["ExperimentConfig", "RateReport", "build_model", "load_config", "parse_config", "run_montecarlo",
           "true_targets"]
