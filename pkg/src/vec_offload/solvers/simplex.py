"""Dense two-phase primal simplex for small linear programs.

Solves ``min c @ x`` subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq`` and
``x >= 0``.  Bland's rule is used throughout, so the method terminates on
degenerate problems; it is meant for problems with a few dozen variables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LPError(RuntimeError):
    pass


class Infeasible(LPError):
    pass


class Unbounded(LPError):
    pass


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    fun: float
    n_iter: int


def _pivot(t: np.ndarray, row: int, col: int) -> None:
    t[row] /= t[row, col]
    for r in range(t.shape[0]):
        if r != row and t[r, col] != 0.0:
            t[r] -= t[r, col] * t[row]


def _run(t: np.ndarray, basis: list[int], n_cols: int, tol: float, max_iter: int) -> int:
    """Iterate on tableau ``t`` (objective in the last row) until optimal."""
    for it in range(max_iter):
        cost = t[-1, :n_cols]
        entering = next((j for j in range(n_cols) if cost[j] < -tol), None)
        if entering is None:
            return it
        col = t[:-1, entering]
        rhs = t[:-1, -1]
        best, leave = np.inf, None
        for r in np.flatnonzero(col > tol):
            ratio = rhs[r] / col[r]
            if ratio < best - tol or (abs(ratio - best) <= tol and basis[r] < basis[leave]):
                best, leave = ratio, r
        if leave is None:
            raise Unbounded("objective is unbounded below")
        _pivot(t, leave, entering)
        basis[leave] = entering
    raise LPError(f"no convergence after {max_iter} pivots")


def solve_lp(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, float)
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, float)
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # equality form with slacks, rows flipped so the right-hand side is >= 0
    A = np.zeros((m, n + m_ub))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    n_struct = n + m_ub

    # phase one: artificial basis, minimise the sum of artificials
    t = np.zeros((m + 1, n_struct + m + 1))
    t[:m, :n_struct] = A
    t[:m, n_struct:n_struct + m] = np.eye(m)
    t[:m, -1] = b
    t[-1, :n_struct] = -A.sum(axis=0)
    t[-1, -1] = -b.sum()
    basis = list(range(n_struct, n_struct + m))
    it1 = _run(t, basis, n_struct + m, tol, max_iter)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if -t[-1, -1] > 1e-8 * scale:
        raise Infeasible(f"phase-one residual {-t[-1, -1]:.3g}")

    # drive remaining artificials out of the basis (or drop redundant rows)
    keep = []
    for r in range(m):
        if basis[r] >= n_struct:
            j = next((j for j in range(n_struct) if abs(t[r, j]) > 1e-9), None)
            if j is None:
                continue
            _pivot(t, r, j)
            basis[r] = j
        keep.append(r)

    t2 = np.zeros((len(keep) + 1, n_struct + 1))
    t2[:-1, :n_struct] = t[keep, :n_struct]
    t2[:-1, -1] = t[keep, -1]
    basis2 = [basis[r] for r in keep]
    cost = np.zeros(n_struct)
    cost[:n] = c
    t2[-1, :n_struct] = cost
    for r, j in enumerate(basis2):
        if cost[j] != 0.0:
            t2[-1] -= cost[j] * t2[r]
    it2 = _run(t2, basis2, n_struct, tol, max_iter)

    x = np.zeros(n_struct)
    for r, j in enumerate(basis2):
        x[j] = t2[r, -1]
    x = x[:n]
    x[np.abs(x) < 1e-13] = 0.0
    return LPResult(x, float(c @ x), it1 + it2)
