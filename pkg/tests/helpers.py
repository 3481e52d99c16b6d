"""Scenario and allocation builders shared by the test modules."""

import numpy as np

from vec_offload.model import ScenarioConfig, TaskSpec, TechKind


def single_task(n_vehicles=1, theta_veh=100.0, lam=50.0, o=10.0, t_max=0.22, **kw):
    """One task, ``lambda=50``, ``o=10`` on a 100 Mbps on-board processor."""
    task_kw = {k: kw.pop(k) for k in list(kw) if k in TaskSpec.__dataclass_fields__}
    task = TaskSpec(0, lam, o, t_max, **task_kw)
    return ScenarioConfig(tasks=(task,), n_vehicles=n_vehicles, theta_veh=theta_veh, **kw)


def alloc(k, **shares):
    """``(k, 5)`` allocation with the given per-tech shares on every row."""
    rho = np.zeros((k, len(TechKind)))
    for name, v in shares.items():
        rho[:, TechKind[name.upper()]] = v
    return rho


def random_scenario(rng, k=None, mask=None):
    k = k or int(rng.integers(1, 6))
    tasks = tuple(
        TaskSpec(
            i,
            float(rng.uniform(1, 100)),
            float(rng.uniform(0, 50)),
            float(rng.uniform(0.05, 2)),
            priority=float(rng.uniform(0, 3)),
            complexity=float(rng.uniform(0.1, 3)),
            fee_cv2x=float(rng.uniform(0, 3)),
            fee_infra=float(rng.uniform(0, 3)),
            fee_veh=float(rng.uniform(0, 3)),
        )
        for i in range(k)
    )
    theta_veh = float(rng.uniform(100, 2000))
    s = ScenarioConfig(
        tasks=tasks,
        n_vehicles=int(rng.integers(1, 10)),
        theta_veh=theta_veh,
        theta_epc=theta_veh * float(rng.uniform(1, 20)),
        r_dsrc=float(rng.uniform(100, 2000)),
        r_cv2x=float(rng.uniform(500, 20000)),
        rts_burstiness=float(rng.uniform(0, 5)),
        theta=float(rng.uniform(0.1, 3)),
        rmmw_control=bool(rng.integers(2)),
        dsrc_access_overhead_mb=None if rng.random() < 0.5 else float(rng.uniform(0, 20)),
    )
    if mask is not None:
        s = s.with_mask(mask)
    return s


def random_alloc(rng, s):
    techs = list(s.masked_techs)
    rho = np.zeros((s.n_tasks, len(TechKind)))
    rho[:, techs] = rng.dirichlet(np.ones(len(techs)), size=s.n_tasks)
    return rho


