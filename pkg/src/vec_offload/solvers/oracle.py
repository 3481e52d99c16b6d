"""Exact grid optimum of the P2 or P3 objective.

Small instances are enumerated outright.  When the grid product exceeds the
enumeration budget the same grid problem is handed to an exact mixed-integer
model (HiGHS via :func:`scipy.optimize.milp`), whose answer is re-scored with
the ordinary objective functions.
"""

from __future__ import annotations

import itertools
import math
import time

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from ..cost import FEAS_TOL, linear_forms, objective_p2, objective_p3
from ..model import N_TECH, ScenarioConfig
from .base import make_result
from .relaxation import constraint_matrices

ALLOWED_STEPS = (0.1, 0.05, 0.01)
DEFAULT_BUDGET = 30_000_000


class BudgetExceeded(RuntimeError):
    def __init__(self, count: int, budget: int) -> None:
        super().__init__(f"grid has {count} points, budget is {budget}")
        self.count = count


def compositions(total: int, parts: int) -> np.ndarray:
    """All non-negative integer vectors of length ``parts`` summing to ``total``."""
    if parts == 1:
        return np.array([[total]])
    out = []
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev, row = -1, []
        for b in bars:
            row.append(b - prev - 1)
            prev = b
        row.append(total + parts - 2 - prev)
        out.append(row)
    return np.array(out, dtype=np.int64)


def grid_size(s: ScenarioConfig, step: float) -> int:
    g = _grid(step)
    m = len(s.tech_mask)
    return math.comb(g + m - 1, m - 1) ** s.n_tasks


def _grid(step: float) -> int:
    if not any(abs(step - a) < 1e-12 for a in ALLOWED_STEPS):
        raise ValueError(f"step must be one of {ALLOWED_STEPS}, got {step}")
    return int(round(1.0 / step))


class _Batch:
    """Vectorised P2/P3 evaluation over many flattened allocations."""

    def __init__(self, s: ScenarioConfig, objective: str) -> None:
        self.s = s
        self.objective = objective
        f = linear_forms(s)
        self.f = f
        k = s.n_tasks
        mask = np.zeros((k, N_TECH), dtype=bool)
        mask[:, list(s.tech_mask)] = True
        self.mask = mask
        self.prio = s.column("priority")
        a_ub, b_ub, _, _, _ = constraint_matrices(s)
        self.a_ub, self.b_ub = a_ub, b_ub

    def __call__(self, x: np.ndarray) -> np.ndarray:
        k = self.s.n_tasks
        f = self.f
        lnp = (f.lnp_const + x @ f.lnp_coef.T).reshape(-1, k, N_TECH)
        if self.objective == "P3":
            fail = np.where(self.mask, lnp, 0.0).sum(axis=2)
        else:
            b = (f.b_const + x @ f.b_coef.T).reshape(-1, k, N_TECH)
            lnp = np.where(b > 0, np.minimum(lnp, 0.0), 0.0)
            used = (x.reshape(-1, k, N_TECH) > 0) & self.mask
            fail = np.where(used, lnp, -np.inf).max(axis=2)
        total = x @ f.cost_coef + fail @ self.prio
        feasible = np.all(x @ self.a_ub.T <= self.b_ub + FEAS_TOL, axis=1)
        return np.where(feasible, total, np.inf)


def _enumerate(s: ScenarioConfig, g: int, objective: str) -> tuple[np.ndarray, int]:
    techs = list(s.masked_techs)
    comp = compositions(g, len(techs))
    rows = np.zeros((len(comp), N_TECH))
    rows[:, techs] = comp / g
    k = s.n_tasks
    batch = _Batch(s, objective)
    best_val, best_x = np.inf, None
    count = 0
    # vectorise over the last task, loop over the rest
    for lead in itertools.product(range(len(rows)), repeat=k - 1):
        x = np.empty((len(rows), k * N_TECH))
        for t, idx in enumerate(lead):
            x[:, t * N_TECH:(t + 1) * N_TECH] = rows[idx]
        x[:, (k - 1) * N_TECH:] = rows
        vals = batch(x)
        count += len(rows)
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val, best_x = vals[j], x[j].copy()
    return best_x.reshape(k, N_TECH), count


def _milp(s: ScenarioConfig, g: int, objective: str) -> np.ndarray:
    k = s.n_tasks
    n = k * N_TECH
    f = linear_forms(s)
    a_ub, b_ub, a_eq, b_eq, free = constraint_matrices(s)
    masked = np.flatnonzero(free)
    prio = s.column("priority")

    if objective == "P3":
        c = (f.cost_coef + (np.repeat(prio, N_TECH) * free) @ f.lnp_coef) / g
        cons = [
            LinearConstraint(a_eq, b_eq * g, b_eq * g),
            LinearConstraint(a_ub / g, -np.inf, b_ub + FEAS_TOL),
        ]
        ub = np.where(free, g, 0)
        res = milp(c, constraints=cons, integrality=np.ones(n), bounds=Bounds(0, ub),
                   options={"mip_rel_gap": 0.0})
        if res.x is None:
            raise RuntimeError(f"grid MILP failed: {res.message}")
        return np.rint(res.x).reshape(k, N_TECH) / g + 0.0

    # variables: u (n ints, grid counts) | z (n binaries, path used) | y (k, clamp) | t (k)
    lo = f.lnp_const[masked] - np.abs(f.lnp_coef[masked]).sum(axis=1)
    hi = f.lnp_const[masked] + np.abs(f.lnp_coef[masked]).sum(axis=1)
    big = float(max(hi.max(), 0.0) - min(lo.min(), 0.0) + 1.0)
    nv = 2 * n + 2 * k
    iu, iz, iy, it = 0, n, 2 * n, 2 * n + k

    rows, lb, ub_ = [], [], []

    def add(row, lo_, hi_):
        rows.append(row)
        lb.append(lo_)
        ub_.append(hi_)

    for i in range(k):
        r = np.zeros(nv)
        r[iu + i * N_TECH:iu + (i + 1) * N_TECH] = 1.0
        add(r, g, g)
    for q in range(a_ub.shape[0]):
        r = np.zeros(nv)
        r[iu:iu + n] = a_ub[q] / g
        add(r, -np.inf, b_ub[q] + FEAS_TOL)
    for j in masked:
        i = j // N_TECH
        r = np.zeros(nv)
        r[iu + j] = 1.0
        r[iz + j] = -g
        add(r, -np.inf, 0.0)
        # t_i >= lnp_j - big * (1 - z_j) - big * y_i
        r = np.zeros(nv)
        r[it + i] = 1.0
        r[iu:iu + n] = -f.lnp_coef[j] / g
        r[iz + j] = -big
        r[iy + i] = big
        add(r, f.lnp_const[j] - big, np.inf)
    for i in range(k):
        # y_i = 1 lets t_i sit at the clamp value 0
        r = np.zeros(nv)
        r[it + i] = 1.0
        r[iy + i] = -big
        add(r, -big, np.inf)

    c = np.zeros(nv)
    c[iu:iu + n] = f.cost_coef / g
    c[it:it + k] = prio
    lower = np.zeros(nv)
    upper = np.zeros(nv)
    upper[iu:iu + n] = np.where(free, g, 0)
    upper[iz:iz + n] = free.astype(float)
    upper[iy:iy + k] = 1.0
    lower[it:it + k] = -big
    upper[it:it + k] = 0.0
    integrality = np.concatenate([np.ones(2 * n + k), np.zeros(k)])
    res = milp(
        c,
        constraints=LinearConstraint(np.array(rows), lb, ub_),
        integrality=integrality,
        bounds=Bounds(lower, upper),
        options={"mip_rel_gap": 0.0},
    )
    if res.x is None:
        raise RuntimeError(f"grid MILP failed: {res.message}")
    return np.rint(res.x[iu:iu + n]).reshape(k, N_TECH) / g + 0.0


def oracle_grid_search(
    s: ScenarioConfig,
    step: float = 0.05,
    objective: str = "P2",
    method: str = "auto",
    budget: int = DEFAULT_BUDGET,
):
    """Grid optimum; ``method`` is ``"enumerate"``, ``"milp"`` or ``"auto"``."""
    if objective not in ("P2", "P3"):
        raise ValueError("objective must be 'P2' or 'P3'")
    g = _grid(step)
    t0 = time.perf_counter()
    count = grid_size(s, step)
    if method == "enumerate" or (method == "auto" and count <= budget):
        if count > budget:
            raise BudgetExceeded(count, budget)
        rho, count = _enumerate(s, g, objective)
        used = "enumerate"
    elif method in ("milp", "auto"):
        rho = _milp(s, g, objective)
        used = "milp"
    else:
        raise ValueError(f"unknown method {method!r}")
    value = objective_p2(rho, s).total if objective == "P2" else objective_p3(rho, s)
    return make_result(
        rho, s, [], time.perf_counter() - t0, "oracle",
        method=used, grid_points=count, objective=objective, value=value,
    )
