"""Nonparametric finite mixture regression: identification oracles and kernel estimators."""

from .errors import (
    ConfigError,
    DataIOError,
    FinmixError,
    NumericalError,
)
from .model_core import MixtureModel
from .presets import PRESETS

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataIOError", "FinmixError", "NumericalError", "MixtureModel", "PRESETS", "__version__"]
