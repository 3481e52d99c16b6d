import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from helpers import alloc, random_alloc, random_scenario, single_task
from vec_offload.cost import feasibility, objective_p2, objective_p3
from vec_offload.model import ScenarioConfig, TaskSpec, TechKind, default_scenario
from vec_offload.solvers import (
    Aggregation,
    Hyperparams,
    derive_seed,
    oracle_grid_search,
    run_fql,
    run_greedy,
    run_qlearning,
    run_relaxation,
)
from vec_offload.solvers.mdp import MdpAction
from vec_offload.solvers.oracle import BudgetExceeded, compositions, grid_size
from vec_offload.solvers.qlearning import aggregate_consensus, new_qtable, q_update
from vec_offload.solvers.relaxation import snap_to_grid
from vec_offload.solvers.simplex import Infeasible, Unbounded, solve_lp

T = TechKind
ACT = MdpAction(T.CV2I, 0, 10)


def small(k=2, mask="DSRC-CMMW", name="default"):
    s = default_scenario(name).with_mask(mask)
    return dataclasses.replace(s, tasks=s.tasks[:k])


# -- table updates -----------------------------------------------------------

def test_q_update_overwrite():
    q = new_qtable(1, 1)
    q[0, 0, 10] = 123.0
    assert q_update(q, 0, ACT, 10, 7.5, 99.0, alpha=1.0, gamma=0.0) == 7.5
    assert q[0, 0, 10] == 7.5


def test_q_update_worked_example():
    q = new_qtable(1, 1)
    assert q_update(q, 0, ACT, 10, 10.0, 20.0, alpha=0.5, gamma=0.9) == 14.0


@pytest.mark.parametrize("r", [-1e6, 0.0, 3.0, 1e9])
def test_q_update_frozen_learner(r):
    q = new_qtable(1, 1)
    q[0, 0, 10] = 4.25
    assert q_update(q, 0, ACT, 10, r, 50.0, alpha=0.0, gamma=0.9) == 4.25


def test_consensus_first_update_is_mean():
    rng = np.random.default_rng(1)
    prev = rng.normal(size=(2, 3, 101))
    locs = [rng.normal(size=(2, 3, 101)) for _ in range(3)]
    assert np.array_equal(aggregate_consensus(prev, locs, 1), np.sum(locs, axis=0) / 3)


def test_consensus_worked_example():
    out = aggregate_consensus(np.zeros(1), [np.array([1.0]), np.array([3.0])], 2)
    assert out[0] == 1.0


@pytest.mark.parametrize("n", [1, 2, 5, 17])
def test_consensus_fixed_point(n):
    c = np.full((2, 2, 101), 2.5)
    assert np.array_equal(aggregate_consensus(c, [c.copy(), c.copy()], n), c)


def test_consensus_rejects_mismatch():
    with pytest.raises(ValueError):
        aggregate_consensus(np.zeros((1, 1, 101)), [np.zeros((2, 1, 101))], 1)
    with pytest.raises(ValueError):
        aggregate_consensus(np.zeros(1), [np.zeros(1)], 0)


@pytest.mark.parametrize(
    "kw", [dict(alpha=0.0), dict(alpha=1.5), dict(gamma=1.0), dict(p_exploit=2.0), dict(n_rounds=-1)]
)
def test_hyperparams_validated(kw):
    with pytest.raises(ValueError):
        Hyperparams(**kw)


def test_derive_seed_stable_and_distinct():
    assert derive_seed(1, "a") == derive_seed(1, "a")
    assert derive_seed(1, "a") != derive_seed(1, "b")
    assert 0 <= derive_seed("x") < 2**64


# -- learners ----------------------------------------------------------------

@pytest.mark.parametrize("agg", list(Aggregation))
def test_fql_without_rounds_returns_start(agg):
    s = default_scenario()
    r = run_fql(s, Hyperparams(n_rounds=0, aggregation=agg))
    assert np.array_equal(r.best_rho, alloc(5, local=1))
    assert r.trajectory == []


def test_ql_without_rounds_returns_start():
    r = run_qlearning(default_scenario(), Hyperparams(n_rounds=0))
    assert np.array_equal(r.best_rho, alloc(5, local=1))


@pytest.mark.parametrize("runner, agg", [(run_fql, Aggregation.SYNC), (run_fql, Aggregation.ASYNC),
                                         (run_qlearning, Aggregation.SYNC)])
def test_learners_deterministic_per_seed(runner, agg):
    s = default_scenario()
    h = Hyperparams(n_rounds=40, seed=9, aggregation=agg)
    a, b = runner(s, h), runner(s, h)
    assert np.array_equal(a.best_rho, b.best_rho)
    assert a.trajectory == b.trajectory
    assert np.array_equal(a.extras["qtable"], b.extras["qtable"])
    c = runner(s, dataclasses.replace(h, seed=10))
    assert c.trajectory != a.trajectory


@pytest.mark.parametrize("runner, agg", [(run_fql, Aggregation.SYNC), (run_fql, Aggregation.ASYNC),
                                         (run_qlearning, Aggregation.SYNC)])
def test_learner_outputs_are_feasible_and_monotone(runner, agg):
    s = default_scenario().with_mask("CV2X-DSRC")
    r = runner(s, Hyperparams(n_rounds=60, seed=3, aggregation=agg))
    assert feasibility(r.best_rho, s).ok
    assert len(r.trajectory) == 60
    assert all(b <= a for a, b in zip(r.trajectory, r.trajectory[1:]))
    assert r.trajectory[-1] == pytest.approx(r.best_cost.total)
    assert np.all(r.best_rho[:, T.CMMW] == 0)


def test_standard_bootstrap_variant_runs():
    s = default_scenario()
    r = run_fql(s, Hyperparams(n_rounds=20, standard_bootstrap=True))
    assert feasibility(r.best_rho, s).ok


# -- greedy ------------------------------------------------------------------

def test_greedy_without_moves_keeps_start():
    s = default_scenario().with_mask({T.LOCAL})
    r = run_greedy(s)
    assert np.array_equal(r.best_rho, alloc(5, local=1))
    assert r.trajectory == []


def test_greedy_reaches_dominant_path():
    # everything on C-V2I is strictly best and free
    s = single_task(n_vehicles=1, fee_cv2x=0.0, fee_infra=0.0).with_mask({T.CV2I, T.LOCAL})
    r = run_greedy(s)
    assert r.best_rho[0, T.CV2I] == 1.0
    assert len(r.trajectory) <= math.ceil(1 / 0.10) + 2
    o = oracle_grid_search(s, 0.01)
    assert r.best_cost.total == pytest.approx(o.best_cost.total)


def test_greedy_rewards_strictly_increase():
    r = run_greedy(default_scenario())
    rewards = r.extras["rewards"]
    assert all(b > a for a, b in zip(rewards, rewards[1:]))
    assert feasibility(r.best_rho, default_scenario()).ok


def test_greedy_step_cap():
    r = run_greedy(default_scenario(), max_steps=3)
    assert len(r.trajectory) == 3


# -- simplex -----------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_simplex_agrees_with_highs(seed):
    rng = np.random.default_rng(seed)
    n, m_ub, m_eq = int(rng.integers(2, 9)), int(rng.integers(0, 5)), int(rng.integers(0, 3))
    x0 = rng.uniform(0, 1, n)
    a_ub = rng.normal(size=(m_ub, n))
    b_ub = a_ub @ x0 + rng.uniform(0, 1, m_ub)
    a_eq = rng.normal(size=(m_eq, n))
    b_eq = a_eq @ x0
    c = rng.normal(size=n)
    ref = linprog(c, A_ub=a_ub if m_ub else None, b_ub=b_ub if m_ub else None,
                  A_eq=a_eq if m_eq else None, b_eq=b_eq if m_eq else None, method="highs")
    if ref.status == 3:
        with pytest.raises(Unbounded):
            solve_lp(c, a_ub, b_ub, a_eq, b_eq)
        return
    assert ref.status == 0
    got = solve_lp(c, a_ub, b_ub, a_eq, b_eq)
    assert got.fun == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)
    assert np.all(got.x >= -1e-9)
    if m_ub:
        assert np.all(a_ub @ got.x <= b_ub + 1e-7)
    if m_eq:
        assert np.allclose(a_eq @ got.x, b_eq, atol=1e-7)


def test_simplex_detects_infeasible():
    with pytest.raises(Infeasible):
        solve_lp([1.0, 1.0], A_eq=[[1.0, 1.0]], b_eq=[-1.0])


def test_simplex_handles_redundant_equalities():
    res = solve_lp([1.0, 2.0], A_eq=[[1.0, 1.0], [2.0, 2.0]], b_eq=[1.0, 2.0])
    assert res.fun == pytest.approx(1.0)
    assert res.x == pytest.approx([1.0, 0.0])


# -- relaxation --------------------------------------------------------------

def test_relaxation_local_only_is_exact():
    s = default_scenario().with_mask({T.LOCAL})
    r = run_relaxation(s)
    assert np.array_equal(r.best_rho, alloc(5, local=1))


def test_relaxation_money_only_stays_local():
    s = default_scenario().with_tasks(priority=0.0, fee_cv2x=2.0, fee_infra=2.0, fee_veh=2.0)
    r = run_relaxation(s)
    assert np.allclose(r.extras["continuous_rho"], alloc(5, local=1))
    o = oracle_grid_search(small(2, "CV2X-DSRC-CMMW").with_tasks(
        priority=0.0, fee_cv2x=2.0, fee_infra=2.0, fee_veh=2.0), 0.1)
    assert np.array_equal(o.best_rho, alloc(2, local=1))


def test_relaxation_beats_random_points(rng):
    s = default_scenario()
    r = run_relaxation(s)
    best = r.extras["p3_continuous"]
    n = 0
    while n < 1000:
        rho = random_alloc(rng, s)
        if feasibility(rho, s).ok:
            assert best <= objective_p3(rho, s) + 1e-9
            n += 1


def test_snap_keeps_budgets():
    rho = np.array([[0.333, 0.333, 0.334, 0.0, 0.0]])
    snapped = snap_to_grid(rho)
    assert snapped.sum() == pytest.approx(1)
    assert np.all(snapped[:, :4] <= rho[:, :4])
    assert snapped[0, T.LOCAL] == pytest.approx(0.01)


def test_relaxation_reports_restriction_when_rate_can_vanish():
    tasks = tuple(TaskSpec(i, 400.0, 5.0, 1.0) for i in range(3))
    s = ScenarioConfig(tasks=tasks, n_vehicles=1, theta_veh=500.0, r_dsrc=1e5)
    r = run_relaxation(s)
    assert r.extras["restricted"]
    assert feasibility(r.best_rho, s).ok


# -- oracle ------------------------------------------------------------------

def test_composition_count():
    assert len(compositions(10, 3)) == 66 == math.comb(12, 2)
    assert np.all(compositions(10, 3).sum(axis=1) == 10)


def test_oracle_single_point():
    s = single_task().with_mask({T.LOCAL})
    r = oracle_grid_search(s, 0.1)
    assert r.extras["grid_points"] == 1
    assert np.array_equal(r.best_rho, alloc(1, local=1))


def test_oracle_three_tech_count():
    s = single_task().with_mask({T.DSRC, T.CMMW, T.LOCAL})
    r = oracle_grid_search(s, 0.1, method="enumerate")
    assert r.extras["grid_points"] == 66


def test_oracle_budget():
    s = default_scenario()
    with pytest.raises(BudgetExceeded) as info:
        oracle_grid_search(s, 0.1, method="enumerate", budget=1000)
    assert info.value.count == grid_size(s, 0.1)


def test_oracle_rejects_odd_step():
    with pytest.raises(ValueError):
        oracle_grid_search(single_task(), 0.03)


@pytest.mark.parametrize("objective", ["P2", "P3"])
@pytest.mark.parametrize("seed", range(8))
def test_milp_matches_enumeration(objective, seed):
    rng = np.random.default_rng(seed)
    mask = ["CV2X-DSRC-CMMW", "CV2X-RMMW", "DSRC-CMMW", "CV2X-DSRC"][seed % 4]
    s = random_scenario(rng, k=2, mask=mask)
    en = oracle_grid_search(s, 0.1, objective, method="enumerate")
    mi = oracle_grid_search(s, 0.1, objective, method="milp")
    assert mi.extras["value"] == pytest.approx(en.extras["value"], rel=1e-9, abs=1e-6)


@pytest.mark.parametrize("seed", range(6))
def test_oracle_dominates_random_grid_points(seed):
    rng = np.random.default_rng(100 + seed)
    s = random_scenario(rng, k=2, mask="CV2X-DSRC")
    o = oracle_grid_search(s, 0.1)
    assert feasibility(o.best_rho, s).ok
    for _ in range(300):
        rho = np.round(random_alloc(rng, s) * 10) / 10
        rho[:, T.LOCAL] += 1 - rho.sum(axis=1)
        if np.all(rho >= 0) and feasibility(rho, s).ok:
            assert o.best_cost.total <= objective_p2(rho, s).total + 1e-9
