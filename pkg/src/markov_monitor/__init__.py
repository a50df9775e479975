"""Remote monitoring of a finite-state Markov source under per-query cost.

Submodules: ``chain`` (world model), ``predictor`` (minimum expected-loss
prediction), ``policies`` (query/predict rules), ``planner`` (optimal
thresholds), ``learning`` (PSGD transition estimation) and ``harness``
(simulation, sweeps, CLI).
"""

from .chain import ChainSpec, NStepTable, absorbing_chain, five_state_chain
from .planner import PlanSolution, exhaustive_oracle, policy_iteration
from .predictor import MonitorState, Prediction, optimal_prediction

__version__ = "0.1.0"

__all__ = [
    "ChainSpec",
    "MonitorState",
    "NStepTable",
    "PlanSolution",
    "Prediction",
    "absorbing_chain",
    "exhaustive_oracle",
    "five_state_chain",
    "optimal_prediction",
    "policy_iteration",
]
