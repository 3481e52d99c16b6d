"""Closed-form delay upper bounds and failure probabilities per offloading path.

Every simplified bound has the shape ``d = (A - ln(eps) / theta) / B`` where
``A`` (Mb) collects burstiness and access overhead and ``B`` (Mbps) is the
residual service rate left for the task.  ``B <= 0`` means the serving
processor is overloaded: the delay is infinite and the failure probability 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import N_TECH, DsrcMacParams, ScenarioConfig, TechKind


class ConvergenceViolated(ArithmeticError):
    """The geometric sums behind the tight failure bound do not converge."""


@dataclass(frozen=True)
class AffineBound:
    num_a: float
    den_b: float
    tech: TechKind
    task_index: int


@dataclass(frozen=True)
class TechCurveParams:
    xi: float
    eta: float
    xi_comp: float
    eta_comp: float
    rho_self_o: float


def dsrc_access_overhead(mac: DsrcMacParams, r_dsrc: float) -> float:
    """Head-of-line back-off volume ``R * W0 * (2M / R)**G`` in Mb."""
    g = mac.backoff_threshold
    return mac.w0 * (2.0 * mac.collision_prob) ** g / r_dsrc ** (g - 1)


def _dsrc_overhead(s: ScenarioConfig) -> float:
    if s.dsrc_access_overhead_mb is not None:
        return s.dsrc_access_overhead_mb
    return dsrc_access_overhead(s.mac, s.r_dsrc)


def coefficient_matrices(rho: np.ndarray, s: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """``(A, B)`` for every (task, technology) pair as two ``(K, 5)`` arrays."""
    rho = np.asarray(rho, dtype=float)
    lam = s.column("arrival_rate")
    o = s.column("burstiness")
    n = s.n_vehicles

    v2i = rho[:, TechKind.CV2I]
    # on-board load weight: offloaded shares count once, local shares N times
    weight = 1.0 - v2i + (n - 1) * rho[:, TechKind.LOCAL]
    a_board = weight @ o / n
    b_board = s.theta_veh - weight @ lam / n

    a = np.empty((s.n_tasks, N_TECH))
    b = np.empty((s.n_tasks, N_TECH))

    a[:, TechKind.LOCAL] = a_board
    b[:, TechKind.LOCAL] = b_board

    a[:, TechKind.DSRC] = a_board + _dsrc_overhead(s)
    b[:, TechKind.DSRC] = b_board + rho[:, TechKind.DSRC] * lam

    cv2v_extra = 0.0
    if s.rmmw_control:
        cv2v_extra = 4.0 * rho[:, TechKind.CV2V].sum() * s.rts_burstiness
    a[:, TechKind.CV2V] = a_board + cv2v_extra
    b[:, TechKind.CV2V] = b_board + rho[:, TechKind.CV2V] * lam

    a[:, TechKind.CMMW] = a_board + 2.0 * (rho[:, TechKind.DSRC] @ o)
    b[:, TechKind.CMMW] = b_board + rho[:, TechKind.CMMW] * lam

    v2i_load = v2i * lam
    a[:, TechKind.CV2I] = v2i @ o
    b[:, TechKind.CV2I] = s.theta_epc - (v2i_load.sum() - v2i_load)
    return a, b


def bound_coefficients(tech: TechKind, i: int, rho: np.ndarray, s: ScenarioConfig) -> AffineBound:
    a, b = coefficient_matrices(rho, s)
    tech = TechKind(tech)
    return AffineBound(float(a[i, tech]), float(b[i, tech]), tech, i)


def _check_eps(eps) -> None:
    if not np.all((np.asarray(eps) > 0) & (np.asarray(eps) <= 1)):
        raise ValueError(f"failure probability must lie in (0, 1], got {eps!r}")


def delay_from_coefficients(a, b, eps, theta: float):
    """Vectorised inversion; infinite where the server is overloaded."""
    _check_eps(eps)
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    num = a - np.log(eps) / theta
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(b > 0, num / np.where(b > 0, b, 1.0), np.inf)
    return d if d.ndim else float(d)


def log_prob_from_coefficients(a, b, d, theta: float, clamp: bool = True):
    """``theta * (A - d * B)``; clamped at 0, and 0 wherever ``B <= 0`` when clamping."""
    a, b, d = np.broadcast_arrays(*(np.asarray(x, float) for x in (a, b, d)))
    val = theta * (a - d * b)
    if clamp:
        val = np.where(b > 0, np.minimum(val, 0.0), 0.0)
    return val if val.ndim else float(val)


def delay_bound(tech: TechKind, i: int, rho: np.ndarray, s: ScenarioConfig, eps: float) -> float:
    _check_eps(eps)
    c = bound_coefficients(tech, i, rho, s)
    return delay_from_coefficients(c.num_a, c.den_b, eps, s.theta)


def failure_log_prob(tech: TechKind, i: int, rho: np.ndarray, s: ScenarioConfig, d: float) -> float:
    if d < 0:
        raise ValueError(f"delay must be non-negative, got {d!r}")
    c = bound_coefficients(tech, i, rho, s)
    return log_prob_from_coefficients(c.num_a, c.den_b, d, s.theta)


def reserved_rates(rho: np.ndarray, s: ScenarioConfig) -> np.ndarray:
    """Per-task licensed bandwidth, shared in proportion to C-V2X demand.

    Used as the transport rate of both the C-V2V and the C-V2I uplink stage.
    """
    rho = np.asarray(rho, dtype=float)
    demand = (rho[:, TechKind.CV2I] + rho[:, TechKind.CV2V]) * s.volumes()
    total = demand.sum()
    if total <= 0:
        return np.full(s.n_tasks, s.r_cv2x / s.n_tasks)
    return s.r_cv2x * demand / total


def curve_params(tech: TechKind, i: int, rho: np.ndarray, s: ScenarioConfig) -> TechCurveParams:
    """Transport and compute envelope parameters of the tight failure bound."""
    tech = TechKind(tech)
    rho = np.asarray(rho, dtype=float)
    a, b = coefficient_matrices(rho, s)
    o_i = s.tasks[i].burstiness
    own = rho[i, tech] * o_i

    if tech is TechKind.CV2I:
        return TechCurveParams(
            xi=float(reserved_rates(rho, s)[i]),
            eta=0.0,
            xi_comp=float(b[i, tech]),
            eta_comp=float(a[i, tech] - own),
            rho_self_o=float(own),
        )
    if tech is TechKind.LOCAL:
        # no transport stage: the transport factor of the tight form is dropped
        return TechCurveParams(
            xi=math.inf, eta=0.0, xi_comp=float(b[i, tech]), eta_comp=float(a[i, tech] - own),
            rho_self_o=float(own),
        )

    a_board = a[i, TechKind.LOCAL]
    if tech is TechKind.DSRC:
        xi, eta = s.r_dsrc, _dsrc_overhead(s)
    elif tech is TechKind.CV2V:
        xi = float(reserved_rates(rho, s)[i])
        eta = a[i, tech] - a_board
    else:
        dsrc = rho[:, TechKind.DSRC]
        xi = s.r_dsrc - 2.0 * float(dsrc @ s.volumes())
        eta = 2.0 * float(dsrc @ s.column("burstiness"))
    return TechCurveParams(
        xi=float(xi),
        eta=float(eta),
        xi_comp=float(b[i, tech]),
        eta_comp=float(a_board - own),
        rho_self_o=float(own),
    )


def tight_failure_log_prob(
    tech: TechKind, i: int, rho: np.ndarray, s: ScenarioConfig, d: float
) -> float:
    """``ln eps`` of the bound before the geometric-sum factors are dropped.

    Working in logs keeps the value meaningful long after ``eps`` underflows.
    """
    if d < 0:
        raise ValueError(f"delay must be non-negative, got {d!r}")
    p = curve_params(tech, i, rho, s)
    lam_i = s.tasks[i].arrival_rate
    th = s.theta
    if not (p.xi > p.xi_comp > lam_i):
        raise ConvergenceViolated(
            f"{TechKind(tech).name} task {i}: need xi > xi_comp > lambda, "
            f"got {p.xi} > {p.xi_comp} > {lam_i}"
        )
    log_num = th * (p.rho_self_o + p.eta_comp + p.eta) - th * p.xi_comp * d
    log_den = math.log1p(-math.exp(-th * (p.xi_comp - lam_i)))
    if math.isfinite(p.xi):
        log_den += math.log1p(-math.exp(-th * (p.xi - p.xi_comp)))
    return min(0.0, log_num - log_den)


def tight_failure_prob(
    tech: TechKind, i: int, rho: np.ndarray, s: ScenarioConfig, d: float
) -> float:
    return math.exp(tight_failure_log_prob(tech, i, rho, s, d))
