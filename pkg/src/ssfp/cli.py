"""Command-line entry point: solve, sweep, curves, validate, export-lp, gen.

Exit codes: 0 success, 2 usage error, 3 infeasible instance or solution,
4 solver node limit.  Diagnostics go to standard error, one line each.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .graph_core import (
    EdgePipeSet,
    InfeasibleInstanceError,
    Instance,
    TwoStageInstance,
    ValidationError,
    validate_feasible,
)
from .instances import (
    SweepConfig,
    all_settings,
    fig2_instance,
    four_cycle_instance,
    load_instance,
    save_instance,
)
from .milp_core import export_lp
from .models import ModelKind, build_do, build_model
from .solver import BnbConfig, solve_milp
from .experiments import (
    cost_curves,
    run_sweep,
    write_curves_csv,
    write_matrix_csv,
    write_ratios_csv,
    write_sweep_csv,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_NODE_LIMIT = 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE) -> None:
        super().__init__(message)
        self.code = code


def _load_target(spec: str, rho2: float | None) -> TwoStageInstance | Instance:
    if spec == "builtin:fig2":
        return fig2_instance(0.5 if rho2 is None else rho2)
    if spec == "builtin:four-cycle":
        return four_cycle_instance()
    if spec.startswith("builtin:"):
        raise CliError(f"unknown builtin instance {spec!r}")
    try:
        two_stage = load_instance(spec)
    except FileNotFoundError:
        raise CliError(f"instance file not found: {spec}") from None
    except InfeasibleInstanceError as err:
        raise CliError(str(err), EXIT_INFEASIBLE) from None
    except ValidationError as err:
        raise CliError(str(err)) from None
    if rho2 is not None:
        if two_stage.num_scenarios != 2:
            raise CliError("--rho2 needs an instance with exactly two scenarios")
        two_stage = two_stage.with_probabilities((1.0 - rho2, rho2))
    return two_stage


def _build_for(target: TwoStageInstance | Instance, model: str, flow: str):
    kind = ModelKind(model, flow)  # type: ignore[arg-type]
    if isinstance(target, Instance):
        if kind.optimization != "do":
            raise CliError(f"{kind.label} needs scenarios; this instance has none")
        return build_do(target, EdgePipeSet(), kind.flow)
    return build_model(kind, target)


def _cmd_solve(args: argparse.Namespace) -> int:
    target = _load_target(args.instance, args.rho2)
    built = _build_for(target, args.model, args.flow)
    config = BnbConfig(node_limit=args.node_limit) if args.node_limit else BnbConfig()
    solution = solve_milp(built.milp, config)
    if solution.status == "node_limit":
        print(f"node limit reached after {solution.node_count} nodes", file=sys.stderr)
        return EXIT_NODE_LIMIT
    if solution.status != "optimal":
        print(f"solve ended with status {solution.status}", file=sys.stderr)
        return EXIT_INFEASIBLE
    graph = target.graph if isinstance(target, Instance) else target.first_stage.graph
    first, per_scenario = built.extract_sets(solution)
    report = {
        "model": built.kind.label,
        "status": solution.status,
        "objective": solution.objective,
        "lp_bound": solution.root_bound,
        "node_count": solution.node_count,
        "solve_time": solution.solve_time,
        "stage_one": [[p, list(graph.endpoints(e))] for p, e in first],
        "scenarios": [
            [[p, list(graph.endpoints(e))] for p, e in pipe_set] for pipe_set in per_scenario
        ],
        "variables": built.num_variables,
        "constraints": built.num_constraints,
    }
    print(f"objective {solution.objective:.6f}")
    print(f"lp bound  {solution.root_bound:.6f}")
    print(f"nodes     {solution.node_count}")
    print("stage one pipes: " + json.dumps(report["stage_one"]))
    for s, pipe_set in enumerate(report["scenarios"], start=1):
        print(f"scenario {s} pipes: " + json.dumps(pipe_set))
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK


def _parse_settings(spec: str, seeds: list[int]) -> list[SweepConfig]:
    if spec == "all":
        return list(all_settings(seeds))
    try:
        s, g, t = (int(part) for part in spec.split(","))
        return [SweepConfig(s, g, t, tuple(seeds))]
    except (ValueError, ValidationError) as err:
        raise CliError(f"bad --settings value {spec!r}: {err}") from None


def _cmd_sweep(args: argparse.Namespace) -> int:
    seeds = list(range(args.seeds))
    configs = _parse_settings(args.settings, seeds)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records, _ = run_sweep(configs, args.threads)
    write_sweep_csv(records, out_dir / "sweep.csv")
    write_matrix_csv(records, out_dir / "matrix.csv")
    write_ratios_csv(records, out_dir / "ratios.csv")
    table = cost_curves(fig2_instance(), [i / 100 for i in range(101)])
    write_curves_csv(table, out_dir / "curves.csv")
    print(f"wrote {len(records)} records to {out_dir}")
    return EXIT_OK


def _parse_grid(spec: str) -> list[float]:
    try:
        start, end, step = (float(part) for part in spec.split(":"))
    except ValueError:
        raise CliError(f"bad --grid value {spec!r}; expected start:end:step") from None
    if step <= 0 or end < start:
        raise CliError("grid needs start <= end and a positive step")
    values = []
    k = 0
    while True:
        value = start + k * step
        if value > end + 1e-12:
            break
        values.append(round(value, 12))
        k += 1
    return values


def _cmd_curves(args: argparse.Namespace) -> int:
    target = _load_target(args.instance, None)
    if isinstance(target, Instance) or target.num_scenarios != 2:
        raise CliError("curves need a two-scenario instance")
    table = cost_curves(target, _parse_grid(args.grid))
    write_curves_csv(table, args.out)
    crossings = ", ".join(str(f) for f in table.intersections)
    print(f"candidates: {len(table.candidates)}; minimizer crossings at rho2 = {crossings}")
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    target = _load_target(args.instance, None)
    instance = target if isinstance(target, Instance) else target.first_stage
    try:
        data = json.loads(Path(args.solution).read_text())
        pairs = frozenset((int(p), int(e)) for p, e in data["pairs"])
        solution = EdgePipeSet(pairs)
    except FileNotFoundError:
        raise CliError(f"solution file not found: {args.solution}") from None
    except (KeyError, TypeError, ValueError) as err:
        raise CliError(f"bad solution file: {err}") from None
    result = validate_feasible(instance, solution)
    if result.ok:
        print("feasible")
        return EXIT_OK
    print(result.detail, file=sys.stderr)
    return EXIT_INFEASIBLE


def _cmd_export_lp(args: argparse.Namespace) -> int:
    target = _load_target(args.instance, args.rho2)
    built = _build_for(target, args.model, args.flow)
    Path(args.out).write_text(export_lp(built.milp))
    print(f"wrote {built.kind.label} model ({built.num_variables} variables, "
          f"{built.num_constraints} constraints) to {args.out}")
    return EXIT_OK


def _cmd_gen(args: argparse.Namespace) -> int:
    configs = _parse_settings(args.config, [args.seed])
    if len(configs) != 1:
        raise CliError("gen needs a single setting, e.g. --config 2,1,3")
    from .instances import random_artificial

    save_instance(random_artificial(configs[0], args.seed), args.out)
    print(f"wrote {configs[0].setting_id} seed {args.seed} to {args.out}")
    return EXIT_OK


def _make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssfp", description="Two-stage stochastic Steiner forest pipe routing toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="build and solve one model")
    solve.add_argument("--instance", required=True, help="path or builtin:fig2 / builtin:four-cycle")
    solve.add_argument("--model", choices=("do", "ro", "so"), required=True)
    solve.add_argument("--flow", choices=("u", "d"), default="u")
    solve.add_argument("--rho2", type=float, default=None)
    solve.add_argument("--node-limit", type=int, default=None)
    solve.add_argument("--out", default=None, help="write a JSON report here")
    solve.set_defaults(func=_cmd_solve)

    sweep = sub.add_parser("sweep", help="run the artificial-instance sweep")
    sweep.add_argument("--settings", default="all", help='"all" or "S,G,T"')
    sweep.add_argument("--seeds", type=int, required=True, help="seeds 0..N-1 per setting")
    sweep.add_argument("--out-dir", required=True)
    sweep.add_argument("--threads", type=int, default=None)
    sweep.set_defaults(func=_cmd_sweep)

    curves = sub.add_parser("curves", help="expected-cost curves over rho2")
    curves.add_argument("--instance", default="builtin:fig2")
    curves.add_argument("--grid", default="0:1:0.01")
    curves.add_argument("--out", required=True)
    curves.set_defaults(func=_cmd_curves)

    validate = sub.add_parser("validate", help="check a solution file for feasibility")
    validate.add_argument("--instance", required=True)
    validate.add_argument("--solution", required=True, help='JSON: {"pairs": [[pipe, edge], ...]}')
    validate.set_defaults(func=_cmd_validate)

    export = sub.add_parser("export-lp", help="write a model in CPLEX LP format")
    export.add_argument("--instance", required=True)
    export.add_argument("--model", choices=("do", "ro", "so"), required=True)
    export.add_argument("--flow", choices=("u", "d"), default="u")
    export.add_argument("--rho2", type=float, default=None)
    export.add_argument("--out", required=True)
    export.set_defaults(func=_cmd_export_lp)

    gen = sub.add_parser("gen", help="generate an artificial instance file")
    gen.add_argument("--config", required=True, help='sweep setting "S,G,T"')
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=_cmd_gen)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    try:
        return args.func(args)
    except CliError as err:
        print(str(err), file=sys.stderr)
        return err.code
    except InfeasibleInstanceError as err:
        print(str(err), file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValidationError as err:
        print(str(err), file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
