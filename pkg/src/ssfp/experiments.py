"""Comparative analyses: cross-objective matrix, VSS, expected-cost curves,
and the seeded artificial sweep with CSV outputs.

CSV column orders are fixed and documented in the README; all outputs are
deterministic given configs and seeds, except for the timing columns of
``sweep.csv``, which necessarily vary between runs.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Literal, Sequence

from .graph_core import EdgePipeSet, TwoStageInstance, cost
from .instances import SweepConfig, random_artificial
from .milp_core import MilpSolution
from .models import ALL_KINDS, BuiltModel, Flow, ModelKind, build_do, build_model
from .solver import BnbConfig, SolverError, solve_milp

Objective = Literal["do", "ro", "so"]
OBJECTIVE_ORDER: tuple[Objective, ...] = ("do", "ro", "so")
MODEL_LABELS = tuple(k.label for k in ALL_KINDS)


def _solve_or_raise(built: BuiltModel, config: BnbConfig = BnbConfig()) -> MilpSolution:
    solution = solve_milp(built.milp, config)
    if solution.status != "optimal":
        raise SolverError(f"{built.kind.label} solve ended with status {solution.status}")
    return solution


def _recourse_costs(
    two_stage: TwoStageInstance, first_stage_solution: EdgePipeSet, flow: Flow
) -> tuple[float, ...]:
    """Optimal retrofit cost per scenario, at inflated prices, given the
    first-stage installation."""
    installed = first_stage_solution | two_stage.existing
    out: list[float] = []
    for s, scenario in enumerate(two_stage.scenarios):
        built = build_do(scenario, installed, flow)
        solution = solve_milp(built.milp)
        if solution.status != "optimal":
            raise SolverError(f"scenario {s} recourse solve ended with {solution.status}")
        out.append(solution.objective)
    return tuple(out)


def evaluate_under(
    objective: Objective,
    two_stage: TwoStageInstance,
    first_stage_solution: EdgePipeSet,
    probabilities: Sequence[float] | None = None,
    flow: Flow = "d",
) -> float:
    """Value of a fixed first-stage solution under one of the three
    objectives: first-stage cost alone (DO), plus worst-case optimal recourse
    (RO), or plus probability-weighted optimal recourse (SO)."""
    first_cost = cost(two_stage.first_stage, two_stage.existing, first_stage_solution)
    if objective == "do":
        return first_cost
    recourse = _recourse_costs(two_stage, first_stage_solution, flow)
    if objective == "ro":
        return first_cost + max(recourse)
    if objective == "so":
        rho = two_stage.probabilities if probabilities is None else tuple(probabilities)
        if len(rho) != two_stage.num_scenarios:
            raise ValueError("need one probability per scenario")
        return first_cost + sum(r * c for r, c in zip(rho, recourse))
    raise ValueError(f"unknown objective {objective!r}")


def deterministic_first_stage(two_stage: TwoStageInstance, flow: Flow = "d") -> EdgePipeSet:
    """First-stage pipe set of the deterministic optimum."""
    built = build_do(two_stage.first_stage, two_stage.existing, flow)
    first, _ = built.extract_sets(_solve_or_raise(built))
    return first


def vss(
    two_stage: TwoStageInstance,
    probabilities: Sequence[float] | None = None,
    flow: Flow = "d",
) -> float:
    """Value of the stochastic solution: the expected cost of deploying the
    deterministic solution (EEVS) minus the stochastic optimum."""
    eevs = evaluate_under(
        "so", two_stage, deterministic_first_stage(two_stage, flow), probabilities, flow
    )
    built = build_model(ModelKind("so", flow), two_stage, _rho_tuple(two_stage, probabilities))
    return eevs - _solve_or_raise(built).objective


def _rho_tuple(
    two_stage: TwoStageInstance, probabilities: Sequence[float] | None
) -> tuple[float, ...] | None:
    return None if probabilities is None else tuple(probabilities)


@dataclass(frozen=True)
class CandidateLine:
    """Expected total cost of one first-stage solution as a function of the
    second-scenario probability: value(rho2) = intercept + slope * rho2."""

    first_stage: EdgePipeSet
    intercept: float
    slope: float

    def value(self, rho2: float) -> float:
        return self.intercept + self.slope * rho2


def _line_for(two_stage: TwoStageInstance, first_set: EdgePipeSet, flow: Flow) -> CandidateLine:
    first_cost = cost(two_stage.first_stage, two_stage.existing, first_set)
    r1, r2 = _recourse_costs(two_stage, first_set, flow)
    return CandidateLine(first_set, first_cost + r1, r2 - r1)


def _solve_so_at(two_stage: TwoStageInstance, rho2: float, flow: Flow) -> tuple[float, EdgePipeSet]:
    built = build_model(ModelKind("so", flow), two_stage, (1.0 - rho2, rho2))
    solution = _solve_or_raise(built)
    first, _ = built.extract_sets(solution)
    return solution.objective, first


def so_candidate_lines(
    two_stage: TwoStageInstance, flow: Flow = "d", tol: float = 1e-9
) -> list[CandidateLine]:
    """All first-stage solutions on the lower envelope of the stochastic
    value function of a two-scenario instance, found by exact parametric
    refinement; sorted by slope descending, i.e. in the order they minimize
    as rho2 grows."""
    if two_stage.num_scenarios != 2:
        raise ValueError("candidate lines require exactly two scenarios")
    lines: dict[frozenset, CandidateLine] = {}

    def line_at(rho2: float) -> CandidateLine:
        _, first = _solve_so_at(two_stage, rho2, flow)
        line = _line_for(two_stage, first, flow)
        lines[line.first_stage.pairs] = line
        return line

    def refine(left: CandidateLine, right: CandidateLine, lo: Fraction, hi: Fraction) -> None:
        if left.first_stage.pairs == right.first_stage.pairs:
            return
        denominator = Fraction(left.slope) - Fraction(right.slope)
        if denominator == 0:
            return
        crossing = (Fraction(right.intercept) - Fraction(left.intercept)) / denominator
        if not lo < crossing < hi:
            return
        rho = float(crossing)
        envelope = min(left.value(rho), right.value(rho))
        value, first = _solve_so_at(two_stage, rho, flow)
        if value >= envelope - tol:
            return
        middle = _line_for(two_stage, first, flow)
        lines[middle.first_stage.pairs] = middle
        refine(left, middle, lo, crossing)
        refine(middle, right, crossing, hi)

    left = line_at(0.0)
    right = line_at(1.0)
    refine(left, right, Fraction(0), Fraction(1))
    return sorted(lines.values(), key=lambda l: (-l.slope, l.intercept))


@dataclass(frozen=True)
class CurveTable:
    """Expected-cost lines of the envelope candidates over a rho2 grid."""

    rho_values: tuple[float, ...]
    candidates: tuple[CandidateLine, ...]
    intersections: tuple[Fraction, ...]

    def so_value(self, rho2: float) -> float:
        return min(line.value(rho2) for line in self.candidates)

    def rows(self) -> list[tuple[float, ...]]:
        return [
            (rho, *(line.value(rho) for line in self.candidates), self.so_value(rho))
            for rho in self.rho_values
        ]


def cost_curves(
    two_stage: TwoStageInstance, rho_grid: Sequence[float], flow: Flow = "d"
) -> CurveTable:
    """Expected cost of every envelope candidate on the grid, the stochastic
    optimum (their pointwise minimum), and the exact crossing points of
    consecutive minimizers."""
    candidates = so_candidate_lines(two_stage, flow)
    intersections: list[Fraction] = []
    for a, b in zip(candidates, candidates[1:]):
        crossing = (Fraction(a.intercept) - Fraction(b.intercept)) / (
            Fraction(b.slope) - Fraction(a.slope)
        )
        intersections.append(crossing)
    return CurveTable(tuple(float(r) for r in rho_grid), tuple(candidates), tuple(intersections))


def vss_curve(
    two_stage: TwoStageInstance, rho_grid: Sequence[float], flow: Flow = "d"
) -> list[tuple[float, float, float]]:
    """(rho2, VSS, stochastic optimum) along a grid, via the exact envelope."""
    table = cost_curves(two_stage, rho_grid, flow)
    eevs = _line_for(two_stage, deterministic_first_stage(two_stage, flow), flow)
    return [
        (rho, eevs.value(rho) - table.so_value(rho), table.so_value(rho))
        for rho in table.rho_values
    ]


@dataclass(frozen=True)
class CrossObjectiveMatrix:
    """Rows: model whose solution is evaluated; columns: objective used; each
    entry normalized by the column owner's optimum."""

    values: tuple[tuple[float, float, float], ...]

    def __post_init__(self) -> None:
        for i in range(3):
            if abs(self.values[i][i] - 1.0) > 1e-9:
                raise ValueError(f"diagonal entry {i} is {self.values[i][i]}, expected 1")
            for j in range(3):
                if self.values[i][j] < 1.0 - 1e-9:
                    raise ValueError(
                        f"entry ({i},{j}) = {self.values[i][j]} undercuts the column optimum"
                    )

    def entry(self, row: Objective, column: Objective) -> float:
        return self.values[OBJECTIVE_ORDER.index(row)][OBJECTIVE_ORDER.index(column)]


@dataclass(frozen=True)
class SweepRecord:
    """Everything measured on one (setting, seed) instance."""

    setting_id: str
    seed: int
    objectives: tuple[float, ...]  # per MODEL_LABELS
    matrix: tuple[tuple[float, float, float], ...]
    evaluations: tuple[tuple[float, float, float], ...]  # unnormalized matrix numerators
    ro_do_ratio: float
    variable_counts: tuple[int, ...]  # per MODEL_LABELS
    constraint_counts: tuple[int, ...]
    build_times: tuple[float, ...]
    solve_times: tuple[float, ...]
    node_counts: tuple[int, ...]


def _solve_six(two_stage: TwoStageInstance) -> tuple[dict[str, MilpSolution], dict[str, BuiltModel]]:
    """Solve all six models with incumbent seeding: each directed solve seeds
    its undirected twin's cutoff, the deterministic solution evaluated under
    the expectation seeds the stochastic solves, and the stochastic solution
    evaluated under the worst case seeds the robust solves.  Cutoffs are
    upper bounds from feasible solutions, so they only prune nodes that
    cannot beat a known plan and never change the reported optimum."""
    solutions: dict[str, MilpSolution] = {}
    builds: dict[str, BuiltModel] = {}
    seed_cutoff: dict[str, float | None] = {"do": None, "so": None, "ro": None}
    for optimization in ("do", "so", "ro"):
        for flow in ("d", "u"):
            kind = ModelKind(optimization, flow)
            built = build_model(kind, two_stage)
            if flow == "u":
                cutoff = solutions[f"{optimization.upper()}-D"].objective + 1e-6
            else:
                cutoff = seed_cutoff[optimization]
            solutions[kind.label] = _solve_or_raise(built, BnbConfig(cutoff=cutoff))
            builds[kind.label] = built
        first, _ = builds[f"{optimization.upper()}-D"].extract_sets(
            solutions[f"{optimization.upper()}-D"]
        )
        if optimization == "do":
            seed_cutoff["so"] = evaluate_under("so", two_stage, first) + 1e-6
        elif optimization == "so":
            seed_cutoff["ro"] = evaluate_under("ro", two_stage, first) + 1e-6
    return solutions, builds


def sweep_record(
    config: SweepConfig, seed: int, two_stage: TwoStageInstance | None = None
) -> SweepRecord:
    if two_stage is None:
        two_stage = random_artificial(config, seed)
    try:
        solutions, builds = _solve_six(two_stage)
    except SolverError as err:
        raise SolverError(f"{config.setting_id} seed {seed}: {err}") from err
    for optimization in OBJECTIVE_ORDER:
        d_obj = solutions[f"{optimization.upper()}-D"].objective
        u_obj = solutions[f"{optimization.upper()}-U"].objective
        if abs(d_obj - u_obj) > 1e-6:
            raise SolverError(
                f"{config.setting_id} seed {seed}: {optimization.upper()} flow formulations "
                f"disagree ({u_obj} vs {d_obj})"
            )
    first_sets = {
        optimization: builds[f"{optimization.upper()}-D"].extract_sets(
            solutions[f"{optimization.upper()}-D"]
        )[0]
        for optimization in OBJECTIVE_ORDER
    }
    evaluations = tuple(
        tuple(
            evaluate_under(column, two_stage, first_sets[row])
            for column in OBJECTIVE_ORDER
        )
        for row in OBJECTIVE_ORDER
    )
    optima = tuple(evaluations[i][i] for i in range(3))
    for i, optimization in enumerate(OBJECTIVE_ORDER):
        model_obj = solutions[f"{optimization.upper()}-D"].objective
        if abs(optima[i] - model_obj) > 1e-6:
            raise SolverError(
                f"{config.setting_id} seed {seed}: re-evaluated {optimization.upper()} optimum "
                f"{optima[i]} disagrees with the model objective {model_obj}"
            )
    matrix = tuple(
        tuple(evaluations[i][j] / optima[j] for j in range(3)) for i in range(3)
    )
    CrossObjectiveMatrix(matrix)  # raises on a violated bound
    return SweepRecord(
        setting_id=config.setting_id,
        seed=seed,
        objectives=tuple(solutions[label].objective for label in MODEL_LABELS),
        matrix=matrix,
        evaluations=evaluations,
        ro_do_ratio=matrix[1][0],
        variable_counts=tuple(builds[label].num_variables for label in MODEL_LABELS),
        constraint_counts=tuple(builds[label].num_constraints for label in MODEL_LABELS),
        build_times=tuple(builds[label].build_time for label in MODEL_LABELS),
        solve_times=tuple(solutions[label].solve_time for label in MODEL_LABELS),
        node_counts=tuple(solutions[label].node_count for label in MODEL_LABELS),
    )


def _sweep_task(args: tuple[SweepConfig, int]) -> SweepRecord:
    return sweep_record(*args)


def sweep_threads(requested: int | None = None) -> int:
    if requested is not None:
        return max(1, requested)
    env = os.environ.get("SSFP_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_sweep(
    configs: Sequence[SweepConfig], threads: int | None = None
) -> tuple[list[SweepRecord], CrossObjectiveMatrix]:
    """Solve all six models on every (setting, seed) instance and aggregate
    the cross-objective matrix as the entrywise mean of per-instance ratios.

    Tasks run in parallel (capped by ``threads`` or SSFP_THREADS); the record
    order is always (setting, seed).  Any failed solve raises with the
    setting and seed in the message.
    """
    tasks = [(config, seed) for config in configs for seed in config.seeds]
    workers = min(sweep_threads(threads), max(len(tasks), 1))
    if workers > 1 and len(tasks) > 1:
        import multiprocessing

        with multiprocessing.Pool(workers) as pool:
            records = pool.map(_sweep_task, tasks, chunksize=1)
    else:
        records = [_sweep_task(task) for task in tasks]
    return list(records), aggregate_matrix(records)


def aggregate_matrix(records: Sequence[SweepRecord]) -> CrossObjectiveMatrix:
    if not records:
        raise ValueError("cannot aggregate an empty record list")
    n = len(records)
    values = tuple(
        tuple(sum(r.matrix[i][j] for r in records) / n for j in range(3)) for i in range(3)
    )
    return CrossObjectiveMatrix(values)


def aggregate_matrix_of_means(records: Sequence[SweepRecord]) -> tuple[tuple[float, ...], ...]:
    """Alternative aggregation: ratio of mean evaluations to mean optima."""
    n = len(records)
    mean_eval = [
        [sum(r.evaluations[i][j] for r in records) / n for j in range(3)] for i in range(3)
    ]
    return tuple(
        tuple(mean_eval[i][j] / mean_eval[j][j] for j in range(3)) for i in range(3)
    )


def _label_columns(prefix: str) -> list[str]:
    return [f"{prefix}_{label.lower().replace('-', '_')}" for label in MODEL_LABELS]


SWEEP_COLUMNS = (
    ["setting", "seed"]
    + _label_columns("obj")
    + [f"m_{r}_{c}" for r in OBJECTIVE_ORDER for c in OBJECTIVE_ORDER]
    + ["ro_do_ratio"]
    + _label_columns("vars")
    + _label_columns("cons")
    + _label_columns("build_time")
    + _label_columns("solve_time")
    + _label_columns("nodes")
)


def write_sweep_csv(records: Sequence[SweepRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SWEEP_COLUMNS)
        for r in records:
            row: list[object] = [r.setting_id, r.seed]
            row += [repr(v) for v in r.objectives]
            row += [repr(v) for line in r.matrix for v in line]
            row += [repr(r.ro_do_ratio)]
            row += list(r.variable_counts)
            row += list(r.constraint_counts)
            row += [f"{v:.6f}" for v in r.build_times]
            row += [f"{v:.6f}" for v in r.solve_times]
            row += list(r.node_counts)
            writer.writerow(row)


def write_matrix_csv(records: Sequence[SweepRecord], path: str | Path) -> None:
    mean_of_ratios = aggregate_matrix(records).values
    ratio_of_means = aggregate_matrix_of_means(records)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["aggregation", "model", "do", "ro", "so"])
        for name, matrix in (("mean_of_ratios", mean_of_ratios), ("ratio_of_means", ratio_of_means)):
            for i, row_name in enumerate(OBJECTIVE_ORDER):
                writer.writerow([name, row_name, *(repr(v) for v in matrix[i])])


def write_ratios_csv(records: Sequence[SweepRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["setting", "seed", "ro_do_ratio"])
        for r in records:
            writer.writerow([r.setting_id, r.seed, repr(r.ro_do_ratio)])


def write_curves_csv(table: CurveTable, path: str | Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        names = [f"route_{i + 1}" for i in range(len(table.candidates))]
        writer.writerow(["rho2", *names, "so_optimum"])
        for row in table.rows():
            writer.writerow([repr(v) for v in row])
