"""Monetary cost, failure penalty, the two objectives and the learner reward."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import N_TECH, ScenarioConfig, TechKind
from .netcalc import coefficient_matrices, log_prob_from_coefficients

FEAS_TOL = 1e-9
_ONBOARD = [TechKind.CV2V, TechKind.CMMW, TechKind.DSRC]


@dataclass(frozen=True)
class CostBreakdown:
    comm: float
    comp: float
    fail_penalty: float
    total: float


@dataclass(frozen=True)
class FeasibilityReport:
    c1_ok: bool
    c2_ok: bool
    c3_ok: bool
    c2_usage: float
    c2_limit: float
    c3_usage: float
    c3_limit: float

    @property
    def ok(self) -> bool:
        return self.c1_ok and self.c2_ok and self.c3_ok


def _comm_vector(rho: np.ndarray, s: ScenarioConfig) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    licensed = rho[:, TechKind.CV2I] + rho[:, TechKind.CV2V]
    return s.column("fee_cv2x") * licensed * s.volumes()


def _comp_vector(rho: np.ndarray, s: ScenarioConfig) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    price = (
        s.column("fee_infra") * rho[:, TechKind.CV2I]
        + s.column("fee_veh") * rho[:, _ONBOARD].sum(axis=1)
    )
    return price * s.column("complexity") * s.volumes()


def comm_cost(i: int, rho: np.ndarray, s: ScenarioConfig) -> float:
    return float(_comm_vector(rho, s)[i])


def comp_cost(i: int, rho: np.ndarray, s: ScenarioConfig) -> float:
    return float(_comp_vector(rho, s)[i])


def log_prob_matrix(rho: np.ndarray, s: ScenarioConfig, clamp: bool = True) -> np.ndarray:
    """``ln eps`` of every (task, technology) pair evaluated at the task deadline."""
    a, b = coefficient_matrices(rho, s)
    t_max = s.column("t_max")[:, None]
    return log_prob_from_coefficients(a, b, t_max, s.theta, clamp=clamp)


def _mask_vector(s: ScenarioConfig) -> np.ndarray:
    m = np.zeros(N_TECH, dtype=bool)
    m[list(s.tech_mask)] = True
    return m


def fail_terms_p2(rho: np.ndarray, s: ScenarioConfig) -> np.ndarray:
    """Per-task worst ``ln eps`` over the masked paths that actually carry traffic."""
    rho = np.asarray(rho, dtype=float)
    lp = log_prob_matrix(rho, s)
    used = (rho > 0) & _mask_vector(s)
    return np.where(used, lp, -np.inf).max(axis=1)


def objective_p2(rho: np.ndarray, s: ScenarioConfig) -> CostBreakdown:
    comm = float(_comm_vector(rho, s).sum())
    comp = float(_comp_vector(rho, s).sum())
    fail = float(s.column("priority") @ fail_terms_p2(rho, s))
    return CostBreakdown(comm, comp, fail, comm + comp + fail)


def p3_fail_term(rho: np.ndarray, s: ScenarioConfig) -> float:
    lp = log_prob_matrix(rho, s, clamp=False)
    return float(s.column("priority") @ lp[:, _mask_vector(s)].sum(axis=1))


def objective_p3(rho: np.ndarray, s: ScenarioConfig) -> float:
    """Relaxed objective: the max over paths becomes a sum of unclamped ``ln eps``."""
    return float(_comm_vector(rho, s).sum() + _comp_vector(rho, s).sum() + p3_fail_term(rho, s))


def feasibility(rho: np.ndarray, s: ScenarioConfig) -> FeasibilityReport:
    rho = np.asarray(rho, dtype=float)
    vol = s.volumes()
    c1 = (
        rho.shape == (s.n_tasks, N_TECH)
        and bool(np.all(rho >= -FEAS_TOL))
        and bool(np.all(np.abs(rho.sum(axis=1) - 1.0) <= FEAS_TOL))
    )
    c2_usage = float(((rho[:, TechKind.CV2I] + rho[:, TechKind.CV2V]) * vol).sum())
    c3_usage = float((rho[:, TechKind.DSRC] * vol).sum())
    c2_limit = s.r_cv2x * s.horizon
    c3_limit = s.r_dsrc * s.horizon
    return FeasibilityReport(
        c1_ok=c1,
        c2_ok=c2_usage <= c2_limit + FEAS_TOL,
        c3_ok=c3_usage <= c3_limit + FEAS_TOL,
        c2_usage=c2_usage,
        c2_limit=c2_limit,
        c3_usage=c3_usage,
        c3_limit=c3_limit,
    )


def reward(rho: np.ndarray, s: ScenarioConfig) -> float:
    return -objective_p2(rho, s).total


@dataclass(frozen=True)
class LinearForms:
    """Affine pieces of the objectives over the flattened ``(K * 5,)`` allocation.

    ``lnp_const + lnp_coef @ x`` is the unclamped ``ln eps`` matrix (flattened),
    ``b_const + b_coef @ x`` the service-rate matrix and ``cost_coef @ x`` the
    communication plus computing cost.
    """

    lnp_const: np.ndarray
    lnp_coef: np.ndarray
    b_const: np.ndarray
    b_coef: np.ndarray
    cost_coef: np.ndarray


def linear_forms(s: ScenarioConfig) -> LinearForms:
    """Extract the affine maps by probing the closed forms at unit allocations."""
    k = s.n_tasks
    n = k * N_TECH
    t_max = s.column("t_max")[:, None]

    def probe(x: np.ndarray):
        rho = x.reshape(k, N_TECH)
        a, b = coefficient_matrices(rho, s)
        lnp = s.theta * (a - t_max * b)
        cost = _comm_vector(rho, s).sum() + _comp_vector(rho, s).sum()
        return lnp.ravel(), b.ravel(), cost

    lnp0, b0, c0 = probe(np.zeros(n))
    lnp_coef = np.empty((n, n))
    b_coef = np.empty((n, n))
    cost_coef = np.empty(n)
    for col in range(n):
        e = np.zeros(n)
        e[col] = 1.0
        lnp1, b1, c1 = probe(e)
        lnp_coef[:, col] = lnp1 - lnp0
        b_coef[:, col] = b1 - b0
        cost_coef[col] = c1 - c0
    return LinearForms(lnp0, lnp_coef, b0, b_coef, cost_coef)
