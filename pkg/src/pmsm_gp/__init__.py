"""Learning-based PMSM tracking control with distributed GP torque prediction."""

from .aggregation import STRATEGIES
from .config import ScenarioConfig, load_config
from .experts import ExpertBank
from .sim import TrajectoryLog, compare, compute_metrics, run_closed_loop

__all__ = [
    "STRATEGIES",
    "ExpertBank",
    "ScenarioConfig",
    "TrajectoryLog",
    "compare",
    "compute_metrics",
    "load_config",
    "run_closed_loop",
]
