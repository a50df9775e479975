from .config import ExperimentConfig, load_config
from .experiments import (
    run_absorbing_replication,
    run_cost_sweep,
    run_learning,
    run_random_chain_study,
    run_uniform_sweep,
)
from .simulate import CostLedger, TrajectoryRecord, simulate, simulate_path

__all__ = [
    "CostLedger",
    "ExperimentConfig",
    "TrajectoryRecord",
    "load_config",
    "run_absorbing_replication",
    "run_cost_sweep",
    "run_learning",
    "run_random_chain_study",
    "run_uniform_sweep",
    "simulate",
    "simulate_path",
]
