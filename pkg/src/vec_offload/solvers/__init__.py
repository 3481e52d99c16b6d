from .base import Aggregation, Hyperparams, SolveResult, derive_seed
from .greedy import run_greedy
from .oracle import oracle_grid_search
from .qlearning import run_fql, run_qlearning
from .relaxation import run_relaxation

__all__ = [
    "Aggregation",
    "Hyperparams",
    "SolveResult",
    "derive_seed",
    "oracle_grid_search",
    "run_fql",
    "run_greedy",
    "run_qlearning",
    "run_relaxation",
]
