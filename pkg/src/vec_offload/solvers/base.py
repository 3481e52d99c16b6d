from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..cost import CostBreakdown, objective_p2


class Aggregation(str, enum.Enum):
    SYNC = "sync"
    ASYNC = "async"


@dataclass(frozen=True)
class Hyperparams:
    alpha: float = 0.1
    gamma: float = 0.9
    p_exploit: float = 0.9
    n_rounds: int = 200
    seed: int = 0
    aggregation: Aggregation = Aggregation.SYNC
    standard_bootstrap: bool = False

    def __post_init__(self) -> None:
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0 <= self.p_exploit <= 1:
            raise ValueError("p_exploit must lie in [0, 1]")
        if self.n_rounds < 0:
            raise ValueError("n_rounds must be non-negative")


@dataclass
class SolveResult:
    best_rho: np.ndarray
    best_cost: CostBreakdown
    trajectory: list[float]
    wall_time: float
    solver_name: str
    extras: dict = field(default_factory=dict)


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from arbitrary printable parts (independent of PYTHONHASHSEED)."""
    text = "\x1f".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.sha256(text).digest()[:8], "little")


def make_result(rho, s, trajectory, wall_time, name, **extras) -> SolveResult:
    rho = np.asarray(rho, dtype=float)
    return SolveResult(rho, objective_p2(rho, s), list(trajectory), wall_time, name, extras)
