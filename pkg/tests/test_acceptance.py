"""Acceptance suite: one test per criterion, each printing a PASS line with
the measured evidence when it completes.

Criterion 5/6 run the full 27-setting artificial sweep and are marked
``sweep`` (deselected by default): exact zero-gap solves of the robust and
stochastic models at that scale need hours of CPU, far beyond the stated
budget, on any cuts-free branch-and-bound (see notes/decisions.md).  Run them
with ``pytest -m sweep``; ``SSFP_SWEEP_SEEDS`` controls the seed count
(default 5).  A small-grid pilot with the same hard invariants always runs.
"""
import math
import os
import time
from fractions import Fraction

import pytest

from ssfp.experiments import (
    aggregate_matrix,
    cost_curves,
    sweep_record,
    vss,
    vss_curve,
)
from ssfp.graph_core import EdgePipeSet, validate_feasible
from ssfp.instances import (
    SweepConfig,
    all_settings,
    fig2_instance,
    four_cycle_instance,
    random_grid_instance,
)
from ssfp.milp_core import export_lp, parse_lp, relax
from ssfp.models import ALL_KINDS, ModelKind, build_do_d, build_do_u, build_model, expected_size
from ssfp.solver import brute_force, solve_lp, solve_milp


def report(criterion: str, detail: str, started: float) -> None:
    print(f"PASS {criterion}: {detail} [{time.perf_counter() - started:.1f}s]")


@pytest.fixture(scope="module")
def fig2():
    return fig2_instance()


@pytest.fixture(scope="module")
def corpus():
    """200 seeded 3x3-grid two-stage instances within the oracle budget."""
    instances = []
    for seed in range(200):
        instances.append(
            random_grid_instance(
                3,
                3,
                num_pipe_types=1,
                num_groups=1 + seed % 2,
                terminals_per_group=2 + (seed // 2) % 2,
                num_scenarios=2,
                seed=seed,
            )
        )
    return instances


def test_criterion_1_worked_example(fig2):
    started = time.perf_counter()
    objectives = {}
    for kind in ALL_KINDS:
        if kind.optimization == "so":
            continue
        objectives[kind.label] = solve_milp(build_model(kind, fig2).milp).objective
    assert objectives["DO-U"] == pytest.approx(4.0, abs=1e-7)
    assert objectives["RO-U"] == pytest.approx(11.0, abs=1e-7)
    assert abs(objectives["DO-U"] - objectives["DO-D"]) <= 1e-7
    assert abs(objectives["RO-U"] - objectives["RO-D"]) <= 1e-7

    expected_so = {0.0: 4.0, 0.45: 10.8, 0.5: 11.0, 1.0: 11.0}
    for rho2, value in expected_so.items():
        per_flow = [
            solve_milp(build_model(ModelKind("so", flow), fig2, (1 - rho2, rho2)).milp).objective
            for flow in ("u", "d")
        ]
        assert per_flow[0] == pytest.approx(value, abs=1e-7), f"SO at rho2={rho2}"
        assert abs(per_flow[0] - per_flow[1]) <= 1e-7

    table = cost_curves(fig2, [0.0, 0.5, 1.0])
    assert list(table.intersections) == [Fraction(5, 12), Fraction(1, 2)]

    elapsed = time.perf_counter() - started
    assert elapsed < 10.0, f"worked example took {elapsed:.1f}s, budget 10s"
    report(
        "criterion 1",
        "DO=4 RO=11 SO(0,0.45,0.5,1)=(4,10.8,11,11), flows agree, "
        "crossings exactly 5/12 and 1/2",
        started,
    )


def test_criterion_2_vss_range(fig2):
    started = time.perf_counter()
    grid = [i / 100 for i in range(101)]
    curve = vss_curve(fig2, grid)
    values = {rho: v for rho, v, _ in curve}
    assert min(values.values()) >= -1e-9
    assert max(values.values()) == pytest.approx(9.0, abs=1e-9)
    assert values[1.0] == pytest.approx(9.0, abs=1e-9)
    ratio = max(v / so for _, v, so in curve)
    assert ratio == pytest.approx(0.818, abs=0.01)
    assert vss(fig2, (0.0, 1.0)) == pytest.approx(9.0, abs=1e-9)
    report(
        "criterion 2",
        f"VSS spans [0, 9] with max 9 at rho2=1; max VSS/SO = {ratio:.4f}",
        started,
    )


def test_criterion_3_relaxation_tightness(corpus):
    started = time.perf_counter()
    inst = four_cycle_instance()
    built_u, built_d = build_do_u(inst), build_do_d(inst)
    assert solve_milp(built_u.milp).objective == pytest.approx(3.0, abs=1e-9)
    assert solve_milp(built_d.milp).objective == pytest.approx(3.0, abs=1e-9)
    lp_u = solve_lp(relax(built_u.milp)).objective
    lp_d = solve_lp(relax(built_d.milp)).objective
    assert lp_u <= 2.0 + 1e-7
    assert lp_d >= lp_u + 0.1
    four_cycle_elapsed = time.perf_counter() - started
    assert four_cycle_elapsed < 5.0

    worst = math.inf
    for ts in corpus:
        u = solve_lp(relax(build_do_u(ts.first_stage).milp)).objective
        d = solve_lp(relax(build_do_d(ts.first_stage).milp)).objective
        worst = min(worst, d - u)
        assert d >= u - 1e-7
    report(
        "criterion 3",
        f"four-cycle ILP=3, LP(U)={lp_u:.4f}, LP(D)={lp_d:.4f}; directed "
        f"dominates undirected on 200 instances (min gap {worst:.2e})",
        started,
    )


def test_criterion_4_oracle_equivalence(corpus):
    started = time.perf_counter()
    checked = 0
    for seed, ts in enumerate(corpus):
        for mode in ("do", "ro", "so"):
            oracle = brute_force(ts, mode).objective
            for flow in ("u", "d"):
                built = build_model(ModelKind(mode, flow), ts)
                objective = solve_milp(built.milp).objective
                assert objective == pytest.approx(oracle, abs=1e-9), (
                    f"seed {seed} {mode}-{flow}: {objective} vs oracle {oracle}"
                )
                checked += 1
    elapsed = time.perf_counter() - started
    assert elapsed < 300.0, f"oracle sweep took {elapsed:.0f}s, budget 300s"
    report(
        "criterion 4",
        f"{checked} solves on 200 instances match the exhaustive oracle to 1e-9",
        started,
    )


_SWEEP_CACHE: dict[int, list] = {}


def _sweep_records(num_seeds: int):
    if num_seeds not in _SWEEP_CACHE:
        records = []
        for config in all_settings(list(range(num_seeds))):
            for seed in config.seeds:
                records.append(sweep_record(config, seed))
        _SWEEP_CACHE[num_seeds] = records
    return _SWEEP_CACHE[num_seeds]


def _check_hard_invariants(records):
    for record in records:
        for i in range(3):
            assert record.matrix[i][i] == pytest.approx(1.0, abs=1e-9)
            for j in range(3):
                assert record.matrix[i][j] >= 1.0 - 1e-7
        # VSS >= 0: the deterministic solution evaluated under the stochastic
        # objective cannot beat the stochastic optimum
        assert record.matrix[0][2] >= 1.0 - 1e-7
        assert record.ro_do_ratio >= 1.0 - 1e-9


# target aggregate averages for the artificial study
REFERENCE_AGGREGATE = {
    (0, 1): 1.286, (0, 2): 1.057,
    (1, 0): 1.623, (1, 2): 1.048,
    (2, 0): 1.225, (2, 1): 1.116,
}


@pytest.mark.sweep
def test_criterion_5_reference_matrix_sweep():
    started = time.perf_counter()
    records = _sweep_records(int(os.environ.get("SSFP_SWEEP_SEEDS", "5")))
    _check_hard_invariants(records)
    matrix = aggregate_matrix(records).values
    for i in range(3):
        assert matrix[i][i] == pytest.approx(1.0, abs=1e-9)
    for (i, j), target in REFERENCE_AGGREGATE.items():
        assert matrix[i][j] == pytest.approx(target, abs=0.15), (
            f"aggregate entry ({i},{j}) = {matrix[i][j]:.3f} vs target {target}"
        )
    formatted = "; ".join(
        f"m[{i}][{j}]={matrix[i][j]:.3f} (target {v})" for (i, j), v in REFERENCE_AGGREGATE.items()
    )
    report("criterion 5", f"{len(records)} records; {formatted}", started)


@pytest.mark.sweep
def test_criterion_6_ratio_distribution():
    started = time.perf_counter()
    records = _sweep_records(int(os.environ.get("SSFP_SWEEP_SEEDS", "5")))
    ratios = sorted(r.ro_do_ratio for r in records)
    assert all(r >= 1.0 - 1e-9 for r in ratios)
    mean = sum(ratios) / len(ratios)
    median = ratios[len(ratios) // 2]
    assert mean > median, f"expected right skew, got mean {mean:.3f} median {median:.3f}"
    report(
        "criterion 6",
        f"all {len(ratios)} RO/DO ratios >= 1; mean {mean:.3f} > median {median:.3f}",
        started,
    )


def test_criterion_5_6_pilot():
    """Hard sub-criteria of the sweep on oracle-sized instances; the full
    reference-matrix comparison needs the ``sweep``-marked run."""
    started = time.perf_counter()
    config = SweepConfig(2, 2, 3, tuple(range(12)))
    records = []
    for seed in config.seeds:
        ts = random_grid_instance(
            3, 3, num_pipe_types=2, num_groups=2, terminals_per_group=2,
            num_scenarios=2, seed=seed,
        )
        records.append(sweep_record(config, seed, ts))
    _check_hard_invariants(records)
    for ts_seed in (0, 1):
        ts = random_grid_instance(
            3, 3, num_pipe_types=1, num_groups=1, terminals_per_group=3,
            num_scenarios=2, seed=ts_seed,
        )
        assert vss(ts) >= -1e-7
    matrix = aggregate_matrix(records).values
    report(
        "criterion 5/6 pilot",
        f"12 small-grid records hold the hard bounds; aggregate row DO = "
        f"(1, {matrix[0][1]:.3f}, {matrix[0][2]:.3f})",
        started,
    )


def test_criterion_7_structural_checks(fig2):
    started = time.perf_counter()
    for kind in ALL_KINDS:
        built = build_model(kind, fig2)
        assert (built.num_variables, built.num_constraints) == expected_size(kind, fig2), (
            f"{kind.label} size stats disagree with the closed forms"
        )

    built = build_do_u(fig2.first_stage)
    assert parse_lp(export_lp(built.milp)) == built.milp
    ro = build_model(ModelKind("ro", "u"), fig2)
    assert parse_lp(export_lp(ro.milp)) == ro.milp

    for kind in ALL_KINDS:
        built = build_model(kind, fig2)
        solution = solve_milp(built.milp)
        for name in built.x_map:
            value = solution.values[name]
            assert abs(value - round(value)) <= 1e-6, f"{kind.label} {name} = {value}"
        for var in built.milp.variables:
            if var.kind == "continuous" and var.name.split("_")[0] in ("y", "yk"):
                value = solution.values[var.name]
                assert abs(value - round(value)) <= 1e-6, f"{kind.label} {var.name}"

        first, scenario_sets = built.extract_sets(solution)
        assert validate_feasible(fig2.first_stage, first)
        for scen_inst, scen_set in zip(fig2.scenarios, scenario_sets):
            assert validate_feasible(scen_inst, scen_set)

    # removing any single load-bearing pair must break feasibility
    do_built = build_do_u(fig2.first_stage)
    do_first, _ = do_built.extract_sets(solve_milp(do_built.milp))
    for pair in do_first:
        assert not validate_feasible(fig2.first_stage, do_first - EdgePipeSet(frozenset({pair})))
    report(
        "criterion 7",
        "size formulas exact on all six builds; LP round-trip identical; "
        "relaxed variables integral; validator accepts solutions and rejects "
        "every single-pair removal",
        started,
    )
