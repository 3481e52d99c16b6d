"""``vec-offload`` command line entry point."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .harness import ExperimentSpec, SpecError, SweepSpec
from .model import FRAMEWORK_MASKS, ScenarioError, load_scenario_ref, validate

EXIT_OK, EXIT_ROW_ERROR, EXIT_SPEC = 0, 1, 2


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="")


def _cmd_run(args) -> int:
    try:
        text = Path(args.spec).read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"cannot read spec: {exc}") from None
    spec = harness.load_spec(
        text,
        scenario=args.scenario,
        solvers=args.solvers.split(",") if args.solvers else None,
        framework_masks=args.masks.split(",") if args.masks else None,
        n_runs=args.n_runs,
        base_seed=args.seed,
        output_path=args.out,
        n_rounds=args.n_rounds,
        oracle_step=args.step,
    )
    scenario = load_scenario_ref(spec.scenario)
    if spec.sweep is not None:
        rows = harness.run_sweep(scenario, spec.sweep, spec.framework_masks[0])
        _write(harness.emit_csv(rows, None, harness.SWEEP_HEADER), spec.output_path)
        return EXIT_OK
    rows = harness.run_experiment(spec, scenario)
    header, body = harness.result_table(rows, spec.record_timing)
    _write(harness.emit_csv(body, None, header), spec.output_path)
    return EXIT_ROW_ERROR if any(r.error for r in rows) else EXIT_OK


def _cmd_sweep(args) -> int:
    scenario = load_scenario_ref(args.scenario)
    sweep = SweepSpec(args.var, args.start, args.stop, args.step)
    rows = harness.run_sweep(scenario, sweep, args.mask)
    _write(harness.emit_csv(rows, None, harness.SWEEP_HEADER), args.out)
    return EXIT_OK


def _cmd_oracle(args) -> int:
    spec = ExperimentSpec(
        scenario=args.scenario,
        solvers=("oracle",),
        framework_masks=(args.mask,),
        oracle_step=args.step,
    )
    spec.check()
    rows = harness.run_experiment(spec, load_scenario_ref(args.scenario))
    header, body = harness.result_table(rows)
    _write(harness.emit_csv(body, None, header), args.out)
    return EXIT_ROW_ERROR if any(r.error for r in rows) else EXIT_OK


def _cmd_validate(args) -> int:
    s = load_scenario_ref(args.scenario)
    problems = validate(s)
    for p in problems:
        print(p)
    if problems:
        return EXIT_SPEC
    print(f"ok: {s.n_tasks} tasks, mask {sorted(t.name for t in s.tech_mask)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vec-offload", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="solver x framework x seed grid from a TOML spec")
    run.add_argument("--spec", required=True)
    run.add_argument("--scenario")
    run.add_argument("--solvers", help="comma separated")
    run.add_argument("--masks", help="comma separated framework names")
    run.add_argument("--n-runs", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--n-rounds", type=int)
    run.add_argument("--step", type=float, help="oracle grid pitch")
    run.add_argument("--out")
    run.set_defaults(func=_cmd_run)

    sw = sub.add_parser("sweep", help="per-technology bound sweep")
    sw.add_argument("--scenario", default="default")
    sw.add_argument("--var", required=True, choices=harness.SWEEP_VARS)
    sw.add_argument("--from", dest="start", type=float, required=True)
    sw.add_argument("--to", dest="stop", type=float, required=True)
    sw.add_argument("--step", type=float, required=True)
    sw.add_argument("--mask", choices=sorted(FRAMEWORK_MASKS))
    sw.add_argument("--out")
    sw.set_defaults(func=_cmd_sweep)

    orc = sub.add_parser("oracle", help="exact grid optimum for one framework")
    orc.add_argument("--scenario", default="default")
    orc.add_argument("--mask", required=True, choices=sorted(FRAMEWORK_MASKS))
    orc.add_argument("--step", type=float, default=0.05)
    orc.add_argument("--out")
    orc.set_defaults(func=_cmd_oracle)

    val = sub.add_parser("validate", help="check a scenario file or preset")
    val.add_argument("--scenario", required=True)
    val.set_defaults(func=_cmd_validate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (SpecError, ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
