"""Experiment runner: solver x framework x seed grids and bound sweeps to CSV."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np
import tomli

from .cost import log_prob_matrix
from .model import (
    FRAMEWORK_MASKS,
    ScenarioConfig,
    TechKind,
    equal_share_allocation,
    load_scenario_ref,
)
from .netcalc import coefficient_matrices, delay_from_coefficients, log_prob_from_coefficients
from .solvers import (
    Aggregation,
    Hyperparams,
    derive_seed,
    oracle_grid_search,
    run_fql,
    run_greedy,
    run_qlearning,
    run_relaxation,
)
from .solvers.oracle import ALLOWED_STEPS

log = logging.getLogger(__name__)

SOLVERS = ("sync-fql", "async-fql", "ql", "greedy", "relax", "oracle")
SWEEP_VARS = ("lambda", "burstiness", "t_max")
SWEEP_EPS = 0.01
# background values held fixed during the lambda / burstiness sweeps
SWEEP_FIXED_BURSTINESS = 100.0
SWEEP_FIXED_LAMBDA = 50.0


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    start: float
    stop: float
    step: float

    def values(self) -> np.ndarray:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return self.start + self.step * np.arange(n)


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: str = "default"
    solvers: tuple[str, ...] = ("sync-fql",)
    framework_masks: tuple[str, ...] = ("CV2X-DSRC-CMMW",)
    n_runs: int = 1
    base_seed: int = 0
    output_path: str | None = None
    n_rounds: int = 200
    alpha: float = 0.1
    gamma: float = 0.9
    p_exploit: float = 0.9
    standard_bootstrap: bool = False
    greedy_max_steps: int = 10_000
    oracle_step: float = 0.05
    record_timing: bool = False
    sweep: SweepSpec | None = None

    def check(self) -> None:
        if self.n_runs < 1:
            raise SpecError("n_runs must be >= 1")
        for name in self.solvers:
            if name not in SOLVERS:
                raise SpecError(f"unknown solver {name!r}; choose from {SOLVERS}")
        for name in self.framework_masks:
            if name not in FRAMEWORK_MASKS:
                raise SpecError(f"unknown framework mask {name!r}")
        if "oracle" in self.solvers and not any(
            abs(self.oracle_step - a) < 1e-12 for a in ALLOWED_STEPS
        ):
            raise SpecError(f"oracle_step must be one of {ALLOWED_STEPS}")
        if self.n_rounds < 0 or self.greedy_max_steps < 0:
            raise SpecError("n_rounds and greedy_max_steps must be non-negative")
        if self.sweep is not None and self.sweep.variable not in SWEEP_VARS:
            raise SpecError(f"unknown sweep variable {self.sweep.variable!r}")


_SPEC_FIELDS = {f for f in ExperimentSpec.__dataclass_fields__ if f != "sweep"}


def load_spec(text: str, **overrides: Any) -> ExperimentSpec:
    """Parse an experiment document; keyword overrides win over file keys."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise SpecError(f"parse error: {exc}") from None
    sweep_doc = doc.pop("sweep", None)
    unknown = set(doc) - _SPEC_FIELDS
    if unknown:
        raise SpecError(f"unknown keys: {sorted(unknown)}")
    doc.update({k: v for k, v in overrides.items() if v is not None})
    for key in ("solvers", "framework_masks"):
        if key in doc:
            doc[key] = tuple(doc[key])
    sweep = None
    if sweep_doc is not None:
        try:
            sweep = SweepSpec(
                str(sweep_doc["variable"]),
                float(sweep_doc["start"]),
                float(sweep_doc["stop"]),
                float(sweep_doc["step"]),
            )
        except KeyError as exc:
            raise SpecError(f"sweep missing {exc.args[0]!r}") from None
    spec = ExperimentSpec(**doc, sweep=sweep)
    spec.check()
    return spec


@dataclass
class ResultRow:
    solver_name: str
    mask_name: str
    run: int
    seed: int
    p2_total: float = math.nan
    comm: float = math.nan
    comp: float = math.nan
    fail_penalty: float = math.nan
    ln_eps: dict[str, float] = field(default_factory=dict)
    wall_time: float = math.nan
    error: str = ""


TECH_COLUMNS = tuple(f"ln_eps_{t.name.lower()}" for t in TechKind)


def _hyper(spec: ExperimentSpec, seed: int, agg: Aggregation = Aggregation.SYNC) -> Hyperparams:
    return Hyperparams(
        alpha=spec.alpha,
        gamma=spec.gamma,
        p_exploit=spec.p_exploit,
        n_rounds=spec.n_rounds,
        seed=seed,
        aggregation=agg,
        standard_bootstrap=spec.standard_bootstrap,
    )


def run_solver(name: str, s: ScenarioConfig, spec: ExperimentSpec, seed: int):
    if name == "sync-fql":
        return run_fql(s, _hyper(spec, seed, Aggregation.SYNC))
    if name == "async-fql":
        return run_fql(s, _hyper(spec, seed, Aggregation.ASYNC))
    if name == "ql":
        return run_qlearning(s, _hyper(spec, seed))
    if name == "greedy":
        return run_greedy(s, spec.greedy_max_steps)
    if name == "relax":
        return run_relaxation(s)
    if name == "oracle":
        return oracle_grid_search(s, spec.oracle_step, "P2")
    raise SpecError(f"unknown solver {name!r}")


def _mean_ln_eps(rho: np.ndarray, s: ScenarioConfig) -> dict[str, float]:
    lp = log_prob_matrix(rho, s)
    return {
        f"ln_eps_{t.name.lower()}": float(lp[:, t].mean()) for t in s.masked_techs
    }


def _run_cell(args) -> ResultRow:
    spec, base, solver, mask, run = args
    seed = derive_seed(spec.base_seed, solver, mask, run)
    row = ResultRow(solver, mask, run, seed)
    s = base.with_mask(mask)
    try:
        res = run_solver(solver, s, spec, seed)
    except Exception as exc:  # recorded as an error row; the grid keeps going
        log.warning("%s/%s run %d failed: %s", solver, mask, run, exc)
        row.error = f"{type(exc).__name__}: {exc}"
        return row
    c = res.best_cost
    row.p2_total, row.comm, row.comp, row.fail_penalty = c.total, c.comm, c.comp, c.fail_penalty
    row.ln_eps = _mean_ln_eps(res.best_rho, s)
    row.wall_time = res.wall_time
    return row


def _workers() -> int:
    raw = os.environ.get("VEC_OFFLOAD_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise SpecError(f"VEC_OFFLOAD_THREADS must be an integer, got {raw!r}") from None
    return (os.cpu_count() or 1) if n <= 0 else n


def run_experiment(spec: ExperimentSpec, scenario: ScenarioConfig | None = None) -> list[ResultRow]:
    spec.check()
    base = scenario if scenario is not None else load_scenario_ref(spec.scenario)
    cells = [
        (spec, base, solver, mask, run)
        for solver in spec.solvers
        for mask in spec.framework_masks
        for run in range(spec.n_runs)
    ]
    workers = min(_workers(), len(cells))
    if workers <= 1:
        return [_run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell, cells))


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return format(value, ".12g")
    return str(value)


def result_table(rows: Sequence[ResultRow], include_timing: bool = False):
    header = ["solver", "mask", "run", "seed", "p2_total", "comm", "comp", "fail_penalty"]
    header += list(TECH_COLUMNS)
    if include_timing:
        header.append("wall_time")
    header.append("error")
    body = []
    for r in rows:
        line = [r.solver_name, r.mask_name, r.run, r.seed, r.p2_total, r.comm, r.comp,
                r.fail_penalty]
        line += [r.ln_eps.get(col, math.nan) for col in TECH_COLUMNS]
        if include_timing:
            line.append(r.wall_time)
        line.append(r.error)
        body.append(line)
    return header, body


def emit_csv(rows: Iterable[Sequence[Any]], path: str | None, header: Sequence[str]) -> str:
    """Write ``header`` plus ``rows``; returns the text.  ``path=None`` skips the write."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


SWEEP_HEADER = ("variable", "value", "tech", "task", "metric", "result", "allocation")


def run_sweep(
    base: ScenarioConfig, sweep: SweepSpec, mask: str | None = None
) -> list[tuple]:
    """Per-technology delay bound (lambda / burstiness) or ``ln eps`` (t_max) sweep.

    Every sweep value is applied to all tasks.  The background allocation gives
    each masked technology an equal share of every task.
    """
    if sweep.variable not in SWEEP_VARS:
        raise SpecError(f"unknown sweep variable {sweep.variable!r}")
    s0 = base.with_mask(mask) if mask else base
    rho = equal_share_allocation(s0)
    out = []
    for value in sweep.values():
        value = float(value)
        if sweep.variable == "lambda":
            s = s0.with_tasks(arrival_rate=value, burstiness=SWEEP_FIXED_BURSTINESS)
        elif sweep.variable == "burstiness":
            s = s0.with_tasks(burstiness=value, arrival_rate=SWEEP_FIXED_LAMBDA)
        else:
            s = s0.with_tasks(t_max=value)
        a, b = coefficient_matrices(rho, s)
        if sweep.variable == "t_max":
            metric = "ln_eps"
            vals = log_prob_from_coefficients(a, b, value, s.theta)
        else:
            metric = "delay_bound"
            vals = delay_from_coefficients(a, b, SWEEP_EPS, s.theta)
        for t in s.masked_techs:
            for i in range(s.n_tasks):
                out.append((sweep.variable, value, t.name, i, metric, float(vals[i, t]),
                            "equal-share"))
    return out


def summarize(rows: Sequence[ResultRow]) -> dict[tuple[str, str], dict[str, float]]:
    """Median and quartiles of ``p2_total`` per (solver, mask), error rows skipped."""
    groups: dict[tuple[str, str], list[float]] = {}
    for r in rows:
        if not r.error:
            groups.setdefault((r.solver_name, r.mask_name), []).append(r.p2_total)
    out = {}
    for key, vals in groups.items():
        q1, med, q3 = np.percentile(vals, [25, 50, 75])
        out[key] = {"n": len(vals), "q1": float(q1), "median": float(med), "q3": float(q3)}
    return out


__all__ = [
    "ExperimentSpec",
    "ResultRow",
    "SpecError",
    "SweepSpec",
    "emit_csv",
    "load_spec",
    "result_table",
    "run_experiment",
    "run_sweep",
    "summarize",
]
