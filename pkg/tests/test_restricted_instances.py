"""Oracle cross-checks on instances that stress the restricted paths:
admissible-edge subsets, pre-existing pipe sets, per-stage pipe feasibility,
and uneven scenario probabilities."""
import numpy as np
import pytest

from ssfp.graph_core import (
    EdgePipeSet,
    Instance,
    PipeCatalog,
    TerminalGroups,
    TwoStageInstance,
    UnionFind,
    cost,
    validate_feasible,
)
from ssfp.instances import grid_graph, make_rng
from ssfp.models import ModelKind, build_model
from ssfp.solver import brute_force, solve_milp


def spanning_subset(graph, rng) -> frozenset[int]:
    """A random spanning tree plus a random half of the remaining edges, so
    every vertex set stays connectable."""
    order = rng.permutation(graph.num_edges)
    uf = UnionFind(graph.num_vertices + 1)
    chosen = set()
    for eid in order:
        u, v = graph.endpoints(int(eid))
        if uf.find(u) != uf.find(v):
            uf.union(u, v)
            chosen.add(int(eid))
        elif rng.random() < 0.5:
            chosen.add(int(eid))
    return frozenset(chosen)


def restricted_instance(seed: int) -> TwoStageInstance:
    rng = make_rng(seed)
    graph = grid_graph(2, 3)
    gamma1 = rng.uniform(1.0, 10.0, size=graph.num_edges)
    catalog = PipeCatalog(2, (tuple(gamma1), tuple(2.0 * gamma1)))

    def stage(multiplier: float) -> Instance:
        size = int(rng.integers(2, 4))
        terminals = tuple(int(t) for t in rng.permutation(np.arange(1, 7))[:size])
        pipes = frozenset({1, 2} if rng.random() < 0.5 else {int(rng.integers(1, 3))})
        return Instance(
            graph, catalog, TerminalGroups((terminals,)), pipes,
            spanning_subset(graph, rng), multiplier,
        )

    first = stage(1.0)
    scenarios = (stage(2.0), stage(2.0))
    rho2 = float(rng.uniform(0.2, 0.8))
    existing = frozenset(
        (p, e)
        for p in (1, 2)
        for e in range(graph.num_edges)
        if rng.random() < 0.1
    )
    return TwoStageInstance(first, scenarios, (1.0 - rho2, rho2), EdgePipeSet(existing))


@pytest.mark.parametrize("seed", range(8))
def test_all_models_match_oracle_on_restricted_instances(seed):
    ts = restricted_instance(seed)
    for mode in ("do", "ro", "so"):
        oracle = brute_force(ts, mode)
        for flow in ("u", "d"):
            built = build_model(ModelKind(mode, flow), ts)
            solution = solve_milp(built.milp)
            assert solution.objective == pytest.approx(oracle.objective, abs=1e-9), (
                f"{mode}-{flow} seed {seed}"
            )
            first, scenario_sets = built.extract_sets(solution)
            assert validate_feasible(ts.first_stage, first)
            if mode != "do":
                for scen_inst, scen_set in zip(ts.scenarios, scenario_sets):
                    assert validate_feasible(scen_inst, scen_set)


def test_existing_pairs_never_charged():
    ts = restricted_instance(3)
    result = brute_force(ts, "do")
    charged = cost(ts.first_stage, ts.existing, result.first_stage)
    assert charged == pytest.approx(result.objective, abs=1e-9)
