"""Multi-market hydro scheduling: planner-trader decomposition with water values."""

from .cascade import Cascade, HourlyRatings, validate_cascade
from .config import ConfigError, RunConfig, bundled_config_path, load_config

__version__ = "0.1.0"

__all__ = ["Cascade", "HourlyRatings", "validate_cascade", "ConfigError", "RunConfig",
           "bundled_config_path", "load_config", "__version__"]
