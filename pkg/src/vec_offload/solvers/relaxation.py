"""Linear relaxation: minimise the summed (unclamped) log failure objective."""

from __future__ import annotations

import time

import numpy as np

from ..cost import linear_forms, objective_p3
from ..model import N_TECH, ScenarioConfig, TechKind
from .base import make_result
from .mdp import GRID
from .simplex import solve_lp

B_MIN = 1.0  # Mbps; floor imposed on service rates that could otherwise vanish


def constraint_matrices(s: ScenarioConfig):
    """C1-C3 over the flattened ``(K * 5,)`` allocation, masked columns pinned to 0.

    Returns ``(A_ub, b_ub, A_eq, b_eq, free)`` where ``free`` flags the columns
    that belong to masked technologies.
    """
    k = s.n_tasks
    n = k * N_TECH
    vol = s.volumes()
    free = np.zeros((k, N_TECH), dtype=bool)
    free[:, list(s.tech_mask)] = True
    free = free.ravel()

    a_eq = np.zeros((k, n))
    for i in range(k):
        a_eq[i, i * N_TECH:(i + 1) * N_TECH] = 1.0
    b_eq = np.ones(k)

    a_ub = np.zeros((2, n))
    for i in range(k):
        a_ub[0, i * N_TECH + TechKind.CV2I] = vol[i]
        a_ub[0, i * N_TECH + TechKind.CV2V] = vol[i]
        a_ub[1, i * N_TECH + TechKind.DSRC] = vol[i]
    b_ub = np.array([s.r_cv2x * s.horizon, s.r_dsrc * s.horizon])
    return a_ub, b_ub, a_eq, b_eq, free


def _restrict(a_ub, b_ub, a_eq, b_eq, free, s, forms):
    """Add ``B >= B_MIN`` rows for masked pairs whose rate can reach zero."""
    mask_cols = np.zeros((s.n_tasks, N_TECH), dtype=bool)
    mask_cols[:, list(s.tech_mask)] = True
    rows, rhs, restricted = [], [], []
    for flat in np.flatnonzero(mask_cols.ravel()):
        coef = forms.b_coef[flat][free]
        low = solve_lp(coef, a_ub[:, free], b_ub, a_eq[:, free], b_eq)
        if forms.b_const[flat] + low.fun <= 0:
            i, h = divmod(int(flat), N_TECH)
            restricted.append((TechKind(h).name, i))
            rows.append(-forms.b_coef[flat])
            rhs.append(forms.b_const[flat] - B_MIN)
    if rows:
        a_ub = np.vstack([a_ub, rows])
        b_ub = np.concatenate([b_ub, rhs])
    return a_ub, b_ub, restricted


def snap_to_grid(rho: np.ndarray) -> np.ndarray:
    """Round shares down to the 0.01 grid and hand the residual to LOCAL.

    Only LOCAL grows, so licensed and DSRC usage can only shrink.
    """
    pct = np.floor(np.asarray(rho) * GRID + 1e-9).astype(np.int64)
    pct[:, TechKind.LOCAL] = 0
    pct[:, TechKind.LOCAL] = GRID - pct.sum(axis=1)
    return pct / GRID


def run_relaxation(s: ScenarioConfig):
    t0 = time.perf_counter()
    forms = linear_forms(s)
    a_ub, b_ub, a_eq, b_eq, free = constraint_matrices(s)
    a_ub, b_ub, restricted = _restrict(a_ub, b_ub, a_eq, b_eq, free, s, forms)

    masked = np.zeros((s.n_tasks, N_TECH), dtype=bool)
    masked[:, list(s.tech_mask)] = True
    prio = np.repeat(s.column("priority"), N_TECH) * masked.ravel()
    c = forms.cost_coef + prio @ forms.lnp_coef
    lp = solve_lp(c[free], a_ub[:, free], b_ub, a_eq[:, free], b_eq)

    x = np.zeros(s.n_tasks * N_TECH)
    x[free] = lp.x
    rho = x.reshape(s.n_tasks, N_TECH)
    rho = np.clip(rho, 0.0, 1.0)
    rho /= rho.sum(axis=1, keepdims=True)
    snapped = snap_to_grid(rho)
    return make_result(
        snapped,
        s,
        [],
        time.perf_counter() - t0,
        "relax",
        continuous_rho=rho,
        p3_continuous=objective_p3(rho, s),
        p3_snapped=objective_p3(snapped, s),
        restricted=restricted,
    )
