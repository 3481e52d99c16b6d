"""Offloading-selection MDP on the 0.01 allocation grid.

Allocations are held as integer percentages so that every reachable state is
exactly on the grid and every row sums to exactly 100.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..cost import FEAS_TOL
from ..model import N_TECH, ScenarioConfig, TechKind

GRID = 100
DELTAS = (10, 1, -10, -1)


class InfeasibleAction(ValueError):
    pass


@dataclass(frozen=True)
class MdpAction:
    tech: TechKind
    task: int
    delta: int  # percentage points, one of DELTAS

    @property
    def delta_fraction(self) -> float:
        return self.delta / GRID


@dataclass(frozen=True, eq=False)
class MdpState:
    pct: np.ndarray  # (K, 5) int, rows sum to GRID
    reserved: tuple[float, float]  # (C-V2X residual, DSRC residual), Mb

    @property
    def rho(self) -> np.ndarray:
        return self.pct / GRID

    def key(self) -> bytes:
        return self.pct.tobytes()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, MdpState) and np.array_equal(self.pct, other.pct)

    def __hash__(self) -> int:
        return hash(self.key())


def _residuals(pct: np.ndarray, s: ScenarioConfig, vol: np.ndarray) -> tuple[float, float]:
    licensed = float((pct[:, TechKind.CV2I] + pct[:, TechKind.CV2V]) @ vol) / GRID
    dsrc = float(pct[:, TechKind.DSRC] @ vol) / GRID
    return s.r_cv2x * s.horizon - licensed, s.r_dsrc * s.horizon - dsrc


def make_state(pct: np.ndarray, s: ScenarioConfig) -> MdpState:
    pct = np.array(pct, dtype=np.int64)
    if pct.shape != (s.n_tasks, N_TECH) or np.any(pct.sum(axis=1) != GRID):
        raise ValueError("grid allocation rows must sum to 100")
    return MdpState(pct, _residuals(pct, s, s.volumes()))


def initial_state(s: ScenarioConfig) -> MdpState:
    pct = np.zeros((s.n_tasks, N_TECH), dtype=np.int64)
    pct[:, TechKind.LOCAL] = GRID
    return make_state(pct, s)


def state_from_rho(rho: np.ndarray, s: ScenarioConfig) -> MdpState:
    pct = np.rint(np.asarray(rho) * GRID).astype(np.int64)
    return make_state(pct, s)


class Transition:
    """Precomputed per-scenario data for cheap action application."""

    def __init__(self, s: ScenarioConfig) -> None:
        self.s = s
        self.vol = s.volumes()
        self.techs = s.masked_techs
        self.n_f = len(self.techs)
        self.others = {
            t: [u for u in self.techs if u is not t and u is not TechKind.LOCAL]
            for t in self.techs
        }

    def candidate_row(self, row: np.ndarray, tech: TechKind, delta: int) -> np.ndarray | None:
        """New percentage row for ``(tech, delta)``; None when it leaves the grid box."""
        new_val = row[tech] + delta
        if not 0 <= new_val <= GRID or tech not in self.s.tech_mask or self.n_f < 2:
            return None
        # each other path moves by the truncated equal share; LOCAL absorbs the rest
        step = int(delta / (self.n_f - 1))
        out = row.copy()
        out[tech] = new_val
        for u in self.others[tech]:
            out[u] = min(GRID, max(0, out[u] - step))
        if tech is not TechKind.LOCAL:
            out[TechKind.LOCAL] = 0
        rest = GRID - out.sum()
        out[TechKind.LOCAL] += rest
        if not 0 <= out[TechKind.LOCAL] <= GRID or np.array_equal(out, row):
            return None
        return out

    def apply(self, state: MdpState, a: MdpAction) -> MdpState | None:
        row = self.candidate_row(state.pct[a.task], a.tech, a.delta)
        if row is None:
            return None
        old = state.pct[a.task]
        d_lic = (
            (row[TechKind.CV2I] + row[TechKind.CV2V]) - (old[TechKind.CV2I] + old[TechKind.CV2V])
        ) * self.vol[a.task] / GRID
        d_dsrc = (row[TechKind.DSRC] - old[TechKind.DSRC]) * self.vol[a.task] / GRID
        res_lic = state.reserved[0] - d_lic
        res_dsrc = state.reserved[1] - d_dsrc
        if (d_lic > 0 and res_lic < -FEAS_TOL) or (d_dsrc > 0 and res_dsrc < -FEAS_TOL):
            return None
        pct = state.pct.copy()
        pct[a.task] = row
        return MdpState(pct, (res_lic, res_dsrc))

    def actions(self, state: MdpState, techs=None) -> list[tuple[MdpAction, MdpState]]:
        """Feasible actions with their successor states, in (tech, task, delta) order."""
        out = []
        for tech in techs if techs is not None else self.techs:
            for task in range(self.s.n_tasks):
                for delta in DELTAS:
                    a = MdpAction(tech, task, delta)
                    nxt = self.apply(state, a)
                    if nxt is not None:
                        out.append((a, nxt))
        return out


def enumerate_actions(state: MdpState, s: ScenarioConfig) -> list[MdpAction]:
    return [a for a, _ in Transition(s).actions(state)]


def apply_action(state: MdpState, a: MdpAction, s: ScenarioConfig) -> MdpState:
    nxt = Transition(s).apply(state, a)
    if nxt is None:
        raise InfeasibleAction(f"{a} is not applicable")
    return nxt
