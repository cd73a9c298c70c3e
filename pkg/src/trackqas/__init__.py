"""Track reconstruction with variational quantum circuits found by tree search."""

from .hamiltonians import VqeParams, build_vqe_hamiltonian, build_vqls_system
from .harness import ExperimentConfig, RunResult, aggregate, efficiency, fault_rate, run_experiment
from .mcts import SearchConfig, search
from .toy_detector import Event, generate_event
from .vqe import AdamConfig, optimize_adam
from .vqls import make_problem, solve_vqls

__all__ = [
    "AdamConfig", "Event", "ExperimentConfig", "RunResult", "SearchConfig", "VqeParams",
    "aggregate", "build_vqe_hamiltonian", "build_vqls_system", "efficiency", "fault_rate",
    "generate_event", "make_problem", "optimize_adam", "run_experiment", "search", "solve_vqls",
]
