"""Leader-based 802.11a multicast simulator (LEP, LB-ARF, RRAM)."""

from .config import ConfigError, MulticastMode, ScenarioConfig, load_config
from .metrics import MetricsReport
from .sim import Simulation, run

__all__ = ["ConfigError", "MetricsReport", "MulticastMode", "ScenarioConfig", "Simulation",
           "load_config", "run"]
__version__ = "0.1.0"
