from __future__ import annotations

import time

from ..cost import reward
from ..model import ScenarioConfig
from .base import SolveResult, make_result
from .mdp import GRID, Transition, initial_state


def run_greedy(s: ScenarioConfig, max_steps: int = 10_000) -> SolveResult:
    """Steepest ascent on the reward over single grid moves.

    Ties go to the first action in (tech, task, delta) enumeration order.  Stops
    at the first state where no move strictly improves the reward.
    """
    if max_steps < 0:
        raise ValueError("max_steps must be non-negative")
    t0 = time.perf_counter()
    trans = Transition(s)
    state = initial_state(s)
    current = reward(state.rho, s)
    trajectory = []
    rewards = [current]
    for _ in range(max_steps):
        best = None
        for _, nxt in trans.actions(state):
            r = reward(nxt.rho, s)
            if r > current and (best is None or r > best[0]):
                best = (r, nxt)
        if best is None:
            break
        current, state = best
        rewards.append(current)
        trajectory.append(-current)
    return make_result(
        state.pct / GRID, s, trajectory, time.perf_counter() - t0, "greedy", rewards=rewards
    )
