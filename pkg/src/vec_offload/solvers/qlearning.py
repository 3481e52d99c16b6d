"""Tabular Q-learning over the allocation grid, plain and federated.

The table is indexed ``[learner technology, task, percentage]``: entry ``k``
scores the state where ``k`` percent of a task rides on that technology.  In
the federated variants every masked technology runs its own learner, which
only moves its own technology's share; a consensus table is averaged from the
local tables and broadcast back.
"""

from __future__ import annotations

import time

import numpy as np

from ..cost import objective_p2
from ..model import ScenarioConfig
from .base import Aggregation, Hyperparams, SolveResult, derive_seed, make_result
from .mdp import GRID, MdpAction, MdpState, Transition, initial_state

N_RHO = GRID + 1


def new_qtable(n_f: int, n_tasks: int) -> np.ndarray:
    return np.zeros((n_f, n_tasks, N_RHO))


def q_update(
    q: np.ndarray,
    slot: int,
    action: MdpAction,
    new_pct: int,
    reward_val: float,
    bootstrap_max: float,
    alpha: float,
    gamma: float,
) -> float:
    """In-place temporal-difference update of one entry; returns the new value.

    ``bootstrap_max`` is the max table value over the actions available at the
    state the action was taken from (or its successor with ``standard_bootstrap``).
    """
    prev = q[slot, action.task, new_pct]
    val = alpha * (reward_val + gamma * bootstrap_max) + (1.0 - alpha) * prev
    q[slot, action.task, new_pct] = val
    return val


def aggregate_consensus(cq_prev: np.ndarray, locals_: list[np.ndarray], n_update: int) -> np.ndarray:
    if n_update < 1:
        raise ValueError("n_update must be >= 1")
    for t in locals_:
        if t.shape != cq_prev.shape:
            raise ValueError(f"table shape {t.shape} != {cq_prev.shape}")
    mean = np.sum(locals_, axis=0) / len(locals_)
    return ((n_update - 1) * cq_prev + mean) / n_update


def _action_values(q, slot_of, options) -> np.ndarray:
    return np.array(
        [q[slot_of[a.tech], a.task, nxt.pct[a.task, a.tech]] for a, nxt in options]
    )


class _Learner:
    def __init__(self, techs, slot_of, rng) -> None:
        self.techs = techs
        self.slot_of = slot_of
        self.rng = rng

    def choose(self, q, options, p_exploit):
        if self.rng.random() < p_exploit:
            vals = _action_values(q, self.slot_of, options)
            best = np.flatnonzero(vals == vals.max())
            idx = best[0] if len(best) == 1 else best[self.rng.integers(len(best))]
        else:
            idx = self.rng.integers(len(options))
        return options[idx], idx


class _Tracker:
    def __init__(self, state: MdpState, s: ScenarioConfig) -> None:
        self.s = s
        self.best_pct = state.pct.copy()
        self.best_total = objective_p2(state.rho, s).total
        self.trajectory: list[float] = []

    def see(self, state: MdpState, total: float) -> None:
        if total < self.best_total:
            self.best_total = total
            self.best_pct = state.pct.copy()

    def end_round(self) -> None:
        self.trajectory.append(self.best_total)


def _step(learner, q, state, trans, s, h):
    """One learner move on the shared state; returns the successor or None."""
    options = trans.actions(state, learner.techs)
    if not options:
        return None
    (a, nxt), _ = learner.choose(q, options, h.p_exploit)
    total = objective_p2(nxt.rho, s).total
    if h.standard_bootstrap:
        follow = trans.actions(nxt, learner.techs)
        boot = _action_values(q, learner.slot_of, follow).max() if follow else 0.0
    else:
        boot = _action_values(q, learner.slot_of, options).max()
    slot = learner.slot_of[a.tech]
    q_update(q, slot, a, int(nxt.pct[a.task, a.tech]), -total, boot, h.alpha, h.gamma)
    return nxt, total


def run_fql(s: ScenarioConfig, h: Hyperparams) -> SolveResult:
    """Federated Q-learning: one learner per masked technology plus an aggregator."""
    t0 = time.perf_counter()
    trans = Transition(s)
    techs = trans.techs
    slot_of = {t: k for k, t in enumerate(techs)}
    n_f = len(techs)
    learners = [
        _Learner((t,), slot_of, np.random.default_rng(derive_seed(h.seed, t.name)))
        for t in techs
    ]
    cq = new_qtable(n_f, s.n_tasks)
    local_q = [cq.copy() for _ in techs]

    state = initial_state(s)
    track = _Tracker(state, s)
    for _ in range(h.n_rounds):
        n_update = 0
        for k, learner in enumerate(learners):
            out = _step(learner, local_q[k], state, trans, s, h)
            if out is None:
                continue
            state, total = out
            track.see(state, total)
            n_update += 1
            if h.aggregation is Aggregation.ASYNC:
                cq = aggregate_consensus(cq, local_q, n_update)
                local_q = [cq.copy() for _ in techs]
        if h.aggregation is Aggregation.SYNC and n_update:
            cq = aggregate_consensus(cq, local_q, n_f)
            local_q = [cq.copy() for _ in techs]
        track.end_round()

    name = "sync-fql" if h.aggregation is Aggregation.SYNC else "async-fql"
    return make_result(
        track.best_pct / GRID, s, track.trajectory, time.perf_counter() - t0, name,
        qtable=cq,
    )


def run_qlearning(s: ScenarioConfig, h: Hyperparams) -> SolveResult:
    """Single learner owning every technology, no aggregation."""
    t0 = time.perf_counter()
    trans = Transition(s)
    techs = trans.techs
    slot_of = {t: k for k, t in enumerate(techs)}
    learner = _Learner(techs, slot_of, np.random.default_rng(derive_seed(h.seed, "ql")))
    q = new_qtable(len(techs), s.n_tasks)

    state = initial_state(s)
    track = _Tracker(state, s)
    for _ in range(h.n_rounds):
        out = _step(learner, q, state, trans, s, h)
        if out is not None:
            state, total = out
            track.see(state, total)
        track.end_round()
    return make_result(
        track.best_pct / GRID, s, track.trajectory, time.perf_counter() - t0, "ql", qtable=q
    )
