"""Scenario description: tasks, fleet, capacities, DSRC MAC parameters, masks.

Units follow the rest of the package: rates in Mbps, volumes in Mb, times in
seconds.  Allocations are plain ``(K, 5)`` float arrays whose columns follow
:class:`TechKind` ordering.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import tomli
import tomli_w


class TechKind(enum.IntEnum):
    DSRC = 0
    CV2I = 1
    CV2V = 2
    CMMW = 3
    LOCAL = 4


N_TECH = len(TechKind)
ALL_TECHS = frozenset(TechKind)

# Framework presets. CV2X-RMMW reuses the CV2V column for the reservation-based
# mmWave path and switches on the control-channel term (``rmmw_control``).
FRAMEWORK_MASKS: dict[str, frozenset[TechKind]] = {
    "CV2X-DSRC-CMMW": frozenset(
        {TechKind.CV2I, TechKind.CV2V, TechKind.DSRC, TechKind.CMMW, TechKind.LOCAL}
    ),
    "DSRC-CMMW": frozenset({TechKind.DSRC, TechKind.CMMW, TechKind.LOCAL}),
    "CV2X-RMMW": frozenset({TechKind.CV2I, TechKind.CV2V, TechKind.LOCAL}),
    "CV2X-DSRC": frozenset({TechKind.CV2I, TechKind.CV2V, TechKind.DSRC, TechKind.LOCAL}),
}
RMMW_FRAMEWORKS = frozenset({"CV2X-RMMW"})


class ScenarioError(ValueError):
    """Raised for malformed or inconsistent scenario documents."""

    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"{key}: {message}")
        self.key = key


class UnknownPreset(ScenarioError):
    pass


class InvalidValue(ScenarioError):
    pass


@dataclass(frozen=True)
class TaskSpec:
    index: int
    arrival_rate: float
    burstiness: float
    t_max: float
    priority: float = 1.0
    complexity: float = 1.0
    fee_cv2x: float = 1.0
    fee_infra: float = 1.0
    fee_veh: float = 1.0

    def volume(self, horizon: float) -> float:
        """Envelope traffic volume ``lambda * horizon + o`` over one horizon."""
        return self.arrival_rate * horizon + self.burstiness


@dataclass(frozen=True)
class DsrcMacParams:
    w0: float = 16.0
    backoff_threshold: int = 5
    retry_limit: int = 7
    collision_prob: float = 0.6


@dataclass(frozen=True)
class ScenarioConfig:
    tasks: tuple[TaskSpec, ...]
    n_vehicles: int = 5
    theta_veh: float = 1e3
    theta_epc: float = 1e4
    r_dsrc: float = 1e3
    r_cv2x: float = 1e4
    rts_burstiness: float = 0.0
    theta: float = 1.0
    mac: DsrcMacParams = field(default_factory=DsrcMacParams)
    tech_mask: frozenset[TechKind] = ALL_TECHS
    horizon: float = 1.0
    rmmw_control: bool = False
    dsrc_access_overhead_mb: float | None = None

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    @property
    def masked_techs(self) -> tuple[TechKind, ...]:
        """Masked technologies in stable index order."""
        return tuple(sorted(self.tech_mask))

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(t, name) for t in self.tasks], dtype=float)

    def volumes(self) -> np.ndarray:
        return self.column("arrival_rate") * self.horizon + self.column("burstiness")

    def with_mask(self, mask: str | Iterable[TechKind]) -> "ScenarioConfig":
        """Copy restricted to a framework preset name or an explicit tech set."""
        if isinstance(mask, str):
            if mask not in FRAMEWORK_MASKS:
                raise UnknownPreset("tech_mask", f"unknown framework {mask!r}")
            return replace(
                self, tech_mask=FRAMEWORK_MASKS[mask], rmmw_control=mask in RMMW_FRAMEWORKS
            )
        return replace(self, tech_mask=frozenset(TechKind(t) for t in mask))

    def with_tasks(self, **columns: Sequence[float] | float) -> "ScenarioConfig":
        """Copy with per-task fields replaced; scalars broadcast to every task."""
        tasks = []
        for k, task in enumerate(self.tasks):
            updates = {
                name: (vals if np.isscalar(vals) else vals[k]) for name, vals in columns.items()
            }
            tasks.append(replace(task, **{n: float(v) for n, v in updates.items()}))
        return replace(self, tasks=tuple(tasks))


# -- presets -----------------------------------------------------------------

def _tasks(lam, o, t_max) -> tuple[TaskSpec, ...]:
    return tuple(
        TaskSpec(index=i, arrival_rate=float(a), burstiness=float(b), t_max=float(t))
        for i, (a, b, t) in enumerate(zip(lam, o, t_max))
    )


_PRESET_TASKS = {
    "default": ([20, 70, 30, 80, 8], [60, 400, 90, 380, 10], [2, 6, 2.5, 3, 1]),
    "light": ([5] * 5, [2] * 5, [1] * 5),
    "heavy": ([100] * 5, [50] * 5, [1] * 5),
}
PRESETS = tuple(_PRESET_TASKS)


def default_scenario(name: str = "default") -> ScenarioConfig:
    if name not in _PRESET_TASKS:
        raise UnknownPreset("preset", f"unknown scenario preset {name!r}")
    return ScenarioConfig(tasks=_tasks(*_PRESET_TASKS[name]))


# -- validation ----------------------------------------------------------------

def validate(s: ScenarioConfig) -> list[str]:
    """Return a list of invariant violations; empty when the scenario is valid."""
    out: list[str] = []
    if not s.tasks:
        out.append("tasks empty")
    for k, t in enumerate(s.tasks):
        if t.index != k:
            out.append(f"task[{k}].index != {k}")
        if not t.arrival_rate > 0:
            out.append(f"task[{k}].lambda <= 0")
        if not t.burstiness >= 0:
            out.append(f"task[{k}].burstiness < 0")
        if not t.t_max > 0:
            out.append(f"task[{k}].t_max <= 0")
        if not t.priority >= 0:
            out.append(f"task[{k}].priority < 0")
        if not t.complexity > 0:
            out.append(f"task[{k}].complexity <= 0")
        for fee in ("fee_cv2x", "fee_infra", "fee_veh"):
            if not getattr(t, fee) >= 0:
                out.append(f"task[{k}].{fee} < 0")
    if s.n_vehicles < 1:
        out.append("n_vehicles < 1")
    if s.theta_epc < s.theta_veh:
        out.append("theta_epc < theta_veh")
    if not s.theta_veh > 0:
        out.append("theta_veh <= 0")
    if not s.r_dsrc > 0:
        out.append("r_dsrc <= 0")
    if not s.r_cv2x > 0:
        out.append("r_cv2x <= 0")
    if not s.theta > 0:
        out.append("theta <= 0")
    if not s.horizon > 0:
        out.append("horizon <= 0")
    if not s.rts_burstiness >= 0:
        out.append("rts_burstiness < 0")
    if TechKind.LOCAL not in s.tech_mask:
        out.append("tech_mask missing LOCAL")
    m = s.mac
    if not m.w0 >= 1:
        out.append("mac.w0 < 1")
    if not 0 < m.backoff_threshold <= m.retry_limit:
        out.append("mac.backoff_threshold not in (0, retry_limit]")
    if not 0 <= m.collision_prob <= 1:
        out.append("mac.collision_prob not in [0, 1]")
    if s.dsrc_access_overhead_mb is not None and not s.dsrc_access_overhead_mb >= 0:
        out.append("dsrc_access_overhead_mb < 0")
    return out


def check_allocation(rho: np.ndarray, s: ScenarioConfig, tol: float = 1e-9) -> list[str]:
    """Violations of the allocation invariants (shape, range, simplex rows, mask)."""
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (s.n_tasks, N_TECH):
        return [f"shape {rho.shape} != {(s.n_tasks, N_TECH)}"]
    out = []
    if np.any(rho < -tol) or np.any(rho > 1 + tol):
        out.append("entries outside [0, 1]")
    if np.any(np.abs(rho.sum(axis=1) - 1.0) > tol):
        out.append("row sums != 1")
    off = [t for t in TechKind if t not in s.tech_mask]
    if off and np.any(rho[:, off] != 0):
        out.append("mass on technologies outside tech_mask")
    return out


def local_allocation(s: ScenarioConfig) -> np.ndarray:
    rho = np.zeros((s.n_tasks, N_TECH))
    rho[:, TechKind.LOCAL] = 1.0
    return rho


def equal_share_allocation(s: ScenarioConfig) -> np.ndarray:
    rho = np.zeros((s.n_tasks, N_TECH))
    techs = list(s.masked_techs)
    rho[:, techs] = 1.0 / len(techs)
    return rho


# -- file format -------------------------------------------------------------

_TOP_KEYS = {
    "n_vehicles": int,
    "theta_veh": float,
    "theta_epc": float,
    "r_dsrc": float,
    "r_cv2x": float,
    "theta": float,
    "horizon": float,
    "rts_burstiness": float,
    "rmmw_control": bool,
    "dsrc_access_overhead_mb": float,
}
_MAC_KEYS = {"w0": float, "backoff_threshold": int, "retry_limit": int, "collision_prob": float}
_TASK_KEYS = {
    "lambda": "arrival_rate",
    "burstiness": "burstiness",
    "t_max": "t_max",
    "priority": "priority",
    "complexity": "complexity",
    "fee_cv2x": "fee_cv2x",
    "fee_infra": "fee_infra",
    "fee_veh": "fee_veh",
}
def _coerce(key: str, value: Any, kind: type) -> Any:
    if kind is bool:
        if not isinstance(value, bool):
            raise InvalidValue(key, f"expected boolean, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidValue(key, f"expected number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise InvalidValue(key, f"expected integer, got {value!r}")
        return int(value)
    return float(value)


def _parse_mask(value: Any) -> tuple[frozenset[TechKind], bool]:
    if isinstance(value, str):
        if value not in FRAMEWORK_MASKS:
            raise InvalidValue("tech_mask", f"unknown framework {value!r}")
        return FRAMEWORK_MASKS[value], value in RMMW_FRAMEWORKS
    if not isinstance(value, list):
        raise InvalidValue("tech_mask", "expected framework name or list of technologies")
    try:
        return frozenset(TechKind[str(v).upper()] for v in value), False
    except KeyError as exc:
        raise InvalidValue("tech_mask", f"unknown technology {exc.args[0]!r}") from None


def scenario_from_mapping(doc: Mapping[str, Any]) -> ScenarioConfig:
    """Build a scenario from a parsed document, filling gaps from a preset."""
    doc = dict(doc)
    base = default_scenario(doc.pop("preset", "default"))
    kwargs: dict[str, Any] = {}
    mac_doc = doc.pop("mac", None)
    task_docs = doc.pop("task", None)
    mask_doc = doc.pop("tech_mask", None)
    for key, value in doc.items():
        if key not in _TOP_KEYS:
            raise InvalidValue(key, "unknown key")
        kwargs[key] = _coerce(key, value, _TOP_KEYS[key])

    if mask_doc is not None:
        mask, rmmw = _parse_mask(mask_doc)
        kwargs["tech_mask"] = mask
        kwargs.setdefault("rmmw_control", rmmw)

    if mac_doc is not None:
        if not isinstance(mac_doc, Mapping):
            raise InvalidValue("mac", "expected a table")
        mac_kwargs = {}
        for key, value in mac_doc.items():
            if key not in _MAC_KEYS:
                raise InvalidValue(f"mac.{key}", "unknown key")
            mac_kwargs[key] = _coerce(f"mac.{key}", value, _MAC_KEYS[key])
        kwargs["mac"] = replace(base.mac, **mac_kwargs)

    if task_docs is not None:
        if not isinstance(task_docs, list):
            raise InvalidValue("task", "expected an array of tables")
        tasks = []
        for k, tdoc in enumerate(task_docs):
            tk: dict[str, Any] = {}
            for key, value in tdoc.items():
                if key not in _TASK_KEYS:
                    raise InvalidValue(f"task[{k}].{key}", "unknown key")
                tk[_TASK_KEYS[key]] = _coerce(f"task[{k}].{key}", value, float)
            for req in ("arrival_rate", "burstiness", "t_max"):
                if req not in tk:
                    name = next(f for f, v in _TASK_KEYS.items() if v == req)
                    raise InvalidValue(f"task[{k}].{name}", "missing required key")
            tasks.append(TaskSpec(index=k, **tk))
        kwargs["tasks"] = tuple(tasks)

    s = replace(base, **kwargs)
    problems = validate(s)
    if problems:
        raise InvalidValue(_offending_key(problems[0]), "; ".join(problems))
    return s


def _offending_key(problem: str) -> str:
    head = problem.split(" ")[0]
    return {"tasks": "task"}.get(head, head)


def load_scenario(text: str) -> ScenarioConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError("<document>", f"parse error: {exc}") from None
    return scenario_from_mapping(doc)


def load_scenario_ref(ref: str) -> ScenarioConfig:
    """Preset name or path to a scenario file."""
    if ref in _PRESET_TASKS:
        return default_scenario(ref)
    with open(ref, encoding="utf-8") as fh:
        return load_scenario(fh.read())


def dump_scenario(s: ScenarioConfig) -> str:
    doc: dict[str, Any] = {
        "n_vehicles": s.n_vehicles,
        "theta_veh": s.theta_veh,
        "theta_epc": s.theta_epc,
        "r_dsrc": s.r_dsrc,
        "r_cv2x": s.r_cv2x,
        "theta": s.theta,
        "horizon": s.horizon,
        "rts_burstiness": s.rts_burstiness,
        "rmmw_control": s.rmmw_control,
        "tech_mask": [t.name for t in s.masked_techs],
    }
    if s.dsrc_access_overhead_mb is not None:
        doc["dsrc_access_overhead_mb"] = s.dsrc_access_overhead_mb
    doc["mac"] = asdict(s.mac)
    inverse = {v: k for k, v in _TASK_KEYS.items()}
    doc["task"] = [
        {inverse[name]: value for name, value in asdict(t).items() if name != "index"}
        for t in s.tasks
    ]
    return tomli_w.dumps(doc)
