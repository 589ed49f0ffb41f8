"""Builders for the six pipe-routing programs: deterministic, robust, and
stochastic objectives, each in an undirected and a directed flow formulation.

Conventions shared by all builders:

* ``x_{p}_{u}_{v}`` is the installation variable of pipe ``p`` on edge
  ``(u, v)``.  In single-stage models it is declared continuous on [0, 1]
  because the binary flow variables force it integral at any optimum.  In the
  two-stage models the first-stage copy must stay binary: retrofit terms
  reward raising it, and the balance point between scenarios can otherwise
  sit at a strictly cheaper fractional value.  Scenario copies only ever feel
  downward pressure, so they stay continuous.  Pre-existing pairs are fixed
  to 1 and carry no cost.
* Scenario copies get an ``_s{s}`` name suffix (``s`` starting at 1) and use
  the scenario's feasible pipes, admissible arcs, terminal groups, and
  inflated costs.
* First-stage installation is charged over every pipe-edge pair not already
  present; retrofit terms charge every pair, which is exact because the
  linking constraints force scenario installations to dominate first-stage
  ones pair by pair.
* Flow-conservation style rows are emitted only for vertices touched by at
  least one admissible arc; rows over an empty sum would be vacuous.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Literal

from .graph_core import EdgePipeSet, Instance, TwoStageInstance
from .milp_core import MilpModel, MilpSolution

Optimization = Literal["do", "ro", "so"]
Flow = Literal["u", "d"]


@dataclass(frozen=True)
class ModelKind:
    """One of the six cells: {DO, RO, SO} x {undirected, directed}."""

    optimization: Optimization
    flow: Flow

    def __post_init__(self) -> None:
        if self.optimization not in ("do", "ro", "so"):
            raise ValueError(f"unknown optimization type {self.optimization!r}")
        if self.flow not in ("u", "d"):
            raise ValueError(f"unknown flow formulation {self.flow!r}")

    @property
    def label(self) -> str:
        return f"{self.optimization.upper()}-{self.flow.upper()}"


@dataclass(frozen=True)
class BuiltModel:
    """A built program plus the map from installation variables back to
    (stage, pipe, edge); stage 0 is the first stage, stages 1..S the
    scenarios."""

    kind: ModelKind
    milp: MilpModel
    x_map: dict[str, tuple[int, int, int]]
    num_variables: int
    num_constraints: int
    num_stages: int
    build_time: float = 0.0

    def __post_init__(self) -> None:
        if self.num_variables != self.milp.num_variables:
            raise ValueError("variable count stat disagrees with the model")
        if self.num_constraints != self.milp.num_constraints:
            raise ValueError("constraint count stat disagrees with the model")

    def extract_sets(self, solution: MilpSolution) -> tuple[EdgePipeSet, tuple[EdgePipeSet, ...]]:
        """Installed pipe-edge pairs per stage from a solved model."""
        stages: list[set[tuple[int, int]]] = [set() for _ in range(self.num_stages)]
        for name, (stage, pipe, edge) in self.x_map.items():
            if solution.values.get(name, 0.0) >= 0.5:
                stages[stage].add((pipe, edge))
        first = EdgePipeSet(frozenset(stages[0]))
        return first, tuple(EdgePipeSet(frozenset(s)) for s in stages[1:])


def _active_vertices(inst: Instance) -> list[int]:
    touched = set()
    for eid in inst.admissible_edges:
        u, v = inst.graph.endpoints(eid)
        touched.add(u)
        touched.add(v)
    return sorted(touched)


class _StageRefs:
    """Handles created for one stage of a model."""

    def __init__(self) -> None:
        self.x: dict[tuple[int, int], int] = {}  # (pipe, edge id) -> handle


def _add_x_variables(
    model: MilpModel, inst: Instance, existing: frozenset[tuple[int, int]], suffix: str
) -> _StageRefs:
    refs = _StageRefs()
    for p in range(1, inst.pipes.num_pipe_types + 1):
        for eid, (u, v) in enumerate(inst.graph.edges):
            fixed = (p, eid) in existing
            refs.x[(p, eid)] = model.add_variable(
                f"x_{p}_{u}_{v}{suffix}",
                "continuous",
                1.0 if fixed else 0.0,
                1.0,
            )
    return refs


def _add_undirected_block(
    model: MilpModel,
    inst: Instance,
    existing: frozenset[tuple[int, int]],
    suffix: str,
) -> _StageRefs:
    """Variables and constraints of the undirected flow formulation: one
    commodity per non-root terminal, flow conservation summed over feasible
    pipes, and anti-parallel coupling of flows to installations."""
    refs = _add_x_variables(model, inst, existing, suffix)
    graph = inst.graph
    pipes = inst.feasible_pipes_sorted()
    adm = inst.admissible_edges_sorted()
    terminals = inst.terminals.non_root_terminals()
    roots = inst.terminals.roots
    group_of = inst.terminals.group_of

    f: dict[tuple[int, int, int, int], int] = {}  # (t, p, u, v) -> handle
    for t in terminals:
        for p in pipes:
            for u, v, _ in graph.arcs(adm):
                f[(t, p, u, v)] = model.add_variable(f"f_{t}_{p}_{u}_{v}{suffix}", "binary")

    out_arcs: dict[int, list[tuple[int, int]]] = {}
    for u, v, _ in graph.arcs(adm):
        out_arcs.setdefault(u, []).append((u, v))
    active = _active_vertices(inst)

    for t in terminals:
        root = roots[group_of[t]]
        for v in active:
            terms: list[tuple[int, float]] = []
            for p in pipes:
                for a, b in out_arcs.get(v, ()):
                    terms.append((f[(t, p, a, b)], 1.0))
                    terms.append((f[(t, p, b, a)], -1.0))
            rhs = 1.0 if v == root else -1.0 if v == t else 0.0
            model.add_constraint(f"flow_{t}_{v}{suffix}", terms, "=", rhs)

    for t in terminals:
        for p in pipes:
            for eid in adm:
                u, v = graph.endpoints(eid)
                model.add_constraint(
                    f"cap_{t}_{p}_{u}_{v}{suffix}",
                    [(f[(t, p, u, v)], 1.0), (f[(t, p, v, u)], 1.0), (refs.x[(p, eid)], -1.0)],
                    "<=",
                    0.0,
                )
    return refs


def _add_directed_block(
    model: MilpModel,
    inst: Instance,
    existing: frozenset[tuple[int, int]],
    suffix: str,
) -> _StageRefs:
    """Variables and constraints of the directed formulation: arborescences
    that merge overlapping groups under a single root, which rules out the
    opposing fractional flow cycles the undirected relaxation admits."""
    refs = _add_x_variables(model, inst, existing, suffix)
    graph = inst.graph
    pipes = inst.feasible_pipes_sorted()
    adm = inst.admissible_edges_sorted()
    groups = inst.terminals.groups
    roots = inst.terminals.roots
    group_of = inst.terminals.group_of
    num_groups = len(groups)
    arcs = [(u, v) for u, v, _ in graph.arcs(adm)]

    def tail_union(k: int) -> list[int]:
        """Terminals of groups k..K (1-based k), ascending."""
        out: set[int] = set()
        for g in groups[k - 1 :]:
            out.update(g)
        return sorted(out)

    commodities = [
        (k, t) for k in range(1, num_groups + 1) for t in tail_union(k) if t != roots[k - 1]
    ]

    f: dict[tuple[int, int, int, int, int], int] = {}
    for k, t in commodities:
        for p in pipes:
            for u, v in arcs:
                f[(k, t, p, u, v)] = model.add_variable(f"fD_{k}_{t}_{p}_{u}_{v}{suffix}", "binary")
    yk: dict[tuple[int, int, int, int], int] = {}
    for k in range(1, num_groups + 1):
        for p in pipes:
            for u, v in arcs:
                yk[(k, p, u, v)] = model.add_variable(
                    f"yk_{k}_{p}_{u}_{v}{suffix}", "continuous", 0.0, 1.0
                )
    y: dict[tuple[int, int, int], int] = {}
    for p in pipes:
        for u, v in arcs:
            y[(p, u, v)] = model.add_variable(f"y_{p}_{u}_{v}{suffix}", "continuous", 0.0, 1.0)
    z: dict[tuple[int, int], int] = {}
    for k in range(1, num_groups + 1):
        for l in range(k, num_groups + 1):
            z[(k, l)] = model.add_variable(f"z_{k}_{l}{suffix}", "binary")

    out_arcs: dict[int, list[tuple[int, int]]] = {}
    for u, v in arcs:
        out_arcs.setdefault(u, []).append((u, v))
    active = _active_vertices(inst)

    # flow conservation with z on the right-hand side, folded to the left
    for k, t in commodities:
        l = group_of[t] + 1
        root = roots[k - 1]
        for v in active:
            terms: list[tuple[int, float]] = []
            for p in pipes:
                for a, b in out_arcs.get(v, ()):
                    terms.append((f[(k, t, p, a, b)], 1.0))
                    terms.append((f[(k, t, p, b, a)], -1.0))
            if v == root:
                terms.append((z[(k, l)], -1.0))
            elif v == t:
                terms.append((z[(k, l)], 1.0))
            model.add_constraint(f"flowD_{k}_{t}_{v}{suffix}", terms, "=", 0.0)

    # flows activate the per-arborescence arc indicators
    for k, t in commodities:
        for p in pipes:
            for u, v in arcs:
                model.add_constraint(
                    f"act_{k}_{t}_{p}_{u}_{v}{suffix}",
                    [(f[(k, t, p, u, v)], 1.0), (yk[(k, p, u, v)], -1.0)],
                    "<=",
                    0.0,
                )

    # every arc belongs to at most one arborescence
    for p in pipes:
        for u, v in arcs:
            terms = [(yk[(k, p, u, v)], 1.0) for k in range(1, num_groups + 1)]
            terms.append((y[(p, u, v)], -1.0))
            model.add_constraint(f"arb_{p}_{u}_{v}{suffix}", terms, "<=", 0.0)

    # one direction per installed edge
    for p in pipes:
        for eid in adm:
            u, v = graph.endpoints(eid)
            model.add_constraint(
                f"dir_{p}_{u}_{v}{suffix}",
                [(y[(p, u, v)], 1.0), (y[(p, v, u)], 1.0), (refs.x[(p, eid)], -1.0)],
                "<=",
                0.0,
            )

    # every group is rooted exactly once, and only at the root of its own
    # arborescence
    for k in range(1, num_groups + 1):
        model.add_constraint(
            f"root_{k}{suffix}", [(z[(l, k)], 1.0) for l in range(1, k + 1)], "=", 1.0
        )
    for k in range(2, num_groups):
        for l in range(k + 1, num_groups + 1):
            model.add_constraint(
                f"rootdom_{k}_{l}{suffix}", [(z[(k, l)], 1.0), (z[(k, k)], -1.0)], "<=", 0.0
            )

    # strengthening rows: single receiving pipe per vertex, no flow into
    # earlier groups, no flow out of a commodity's own sink, and flow balance
    # at vertices that are not targets
    for v in active:
        # inbound arcs are the reverses of v's outbound ones
        terms = [(y[(p, b, a)], 1.0) for p in pipes for a, b in out_arcs.get(v, ())]
        model.add_constraint(f"onepipe_{v}{suffix}", terms, "<=", 1.0)

    for k in range(2, num_groups + 1):
        for t in sorted(t for g in groups[: k - 1] for t in g):
            terms = [(yk[(k, p, b, a)], 1.0) for p in pipes for a, b in out_arcs.get(t, ())]
            model.add_constraint(f"noearly_{k}_{t}{suffix}", terms, "=", 0.0)

    for k, t in commodities:
        terms = [(f[(k, t, p, a, b)], 1.0) for p in pipes for a, b in out_arcs.get(t, ())]
        model.add_constraint(f"nosinkout_{k}_{t}{suffix}", terms, "=", 0.0)

    all_terminals = inst.terminals.all_terminals
    for v in active:
        if v in all_terminals:
            continue
        terms = [(y[(p, b, a)], 1.0) for p in pipes for a, b in out_arcs.get(v, ())]
        terms += [(y[(p, a, b)], -1.0) for p in pipes for a, b in out_arcs.get(v, ())]
        model.add_constraint(f"bal_{v}{suffix}", terms, "<=", 0.0)

    for k in range(1, num_groups + 1):
        targets = set(tail_union(k)) - {roots[k - 1]}
        for v in active:
            if v in targets:
                continue
            terms = [(yk[(k, p, b, a)], 1.0) for p in pipes for a, b in out_arcs.get(v, ())]
            terms += [(yk[(k, p, a, b)], -1.0) for p in pipes for a, b in out_arcs.get(v, ())]
            model.add_constraint(f"balk_{k}_{v}{suffix}", terms, "<=", 0.0)

    # an arborescence may enter a later root only if it owns that group
    for k in range(1, num_groups):
        for l in range(k + 1, num_groups + 1):
            rl = roots[l - 1]
            for p in pipes:
                terms = [(yk[(k, p, b, a)], 1.0) for a, b in out_arcs.get(rl, ())]
                terms.append((z[(k, l)], -1.0))
                model.add_constraint(f"rootuse_{k}_{l}_{p}{suffix}", terms, "<=", 0.0)
    return refs


_BLOCKS = {"u": _add_undirected_block, "d": _add_directed_block}


def _stage_cost_coefficients(
    inst: Instance, refs: _StageRefs, existing: frozenset[tuple[int, int]]
) -> dict[int, float]:
    return {
        handle: inst.pair_cost(p, eid)
        for (p, eid), handle in refs.x.items()
        if (p, eid) not in existing
    }


def _x_name_map(model: MilpModel, stages: list[_StageRefs]) -> dict[str, tuple[int, int, int]]:
    out: dict[str, tuple[int, int, int]] = {}
    for stage, refs in enumerate(stages):
        for (p, eid), handle in refs.x.items():
            out[model.variables[handle].name] = (stage, p, eid)
    return out


def build_do(instance: Instance, existing: EdgePipeSet = EdgePipeSet(), flow: Flow = "u") -> BuiltModel:
    """Single-stage deterministic model on one instance."""
    started = time.perf_counter()
    existing.check(instance.graph, instance.pipes.num_pipe_types)
    kind = ModelKind("do", flow)
    model = MilpModel(kind.label)
    refs = _BLOCKS[flow](model, instance, existing.pairs, "")
    model.set_objective(_stage_cost_coefficients(instance, refs, existing.pairs))
    return BuiltModel(
        kind,
        model,
        _x_name_map(model, [refs]),
        model.num_variables,
        model.num_constraints,
        1,
        time.perf_counter() - started,
    )


def build_do_u(instance: Instance, existing: EdgePipeSet = EdgePipeSet()) -> BuiltModel:
    return build_do(instance, existing, "u")


def build_do_d(instance: Instance, existing: EdgePipeSet = EdgePipeSet()) -> BuiltModel:
    return build_do(instance, existing, "d")


def _build_two_stage(
    two_stage: TwoStageInstance,
    flow: Flow,
    robust: bool,
    probabilities: tuple[float, ...],
) -> BuiltModel:
    started = time.perf_counter()
    kind = ModelKind("ro" if robust else "so", flow)
    model = MilpModel(kind.label)
    first = two_stage.first_stage
    existing = two_stage.existing.pairs
    block = _BLOCKS[flow]

    stage_refs = [block(model, first, existing, "")]
    for (p, eid), handle in stage_refs[0].x.items():
        if (p, eid) not in existing:  # fixed pairs stay continuous at [1, 1]
            model.make_binary(handle)
    for s, scenario in enumerate(two_stage.scenarios, start=1):
        stage_refs.append(block(model, scenario, frozenset(), f"_s{s}"))

    objective = _stage_cost_coefficients(first, stage_refs[0], existing)
    d_handle = model.add_variable("d", "continuous", 0.0) if robust else None
    if robust:
        objective[d_handle] = 1.0

    for s, scenario in enumerate(two_stage.scenarios, start=1):
        rho = probabilities[s - 1]
        refs = stage_refs[s]
        epigraph: list[tuple[int, float]] = [(d_handle, 1.0)] if robust else []
        for (p, eid), handle in refs.x.items():
            inflated = scenario.pair_cost(p, eid)
            first_handle = stage_refs[0].x[(p, eid)]
            u, v = first.graph.endpoints(eid)
            model.add_constraint(
                f"link_{p}_{u}_{v}_s{s}", [(handle, 1.0), (first_handle, -1.0)], ">=", 0.0
            )
            if robust:
                epigraph.append((handle, -inflated))
                epigraph.append((first_handle, inflated))
            else:
                objective[handle] = objective.get(handle, 0.0) + rho * inflated
                objective[first_handle] = objective.get(first_handle, 0.0) - rho * inflated
        if robust:
            model.add_constraint(f"worst_s{s}", epigraph, ">=", 0.0)
    model.set_objective(objective)
    return BuiltModel(
        kind,
        model,
        _x_name_map(model, stage_refs),
        model.num_variables,
        model.num_constraints,
        1 + two_stage.num_scenarios,
        time.perf_counter() - started,
    )


def build_ro(two_stage: TwoStageInstance, flow: Flow = "u") -> BuiltModel:
    """Min-max model: first-stage cost plus the worst-case retrofit, captured
    by an epigraph variable over the scenario retrofit costs."""
    if not two_stage.scenarios:
        raise ValueError("robust model needs at least one scenario")
    return _build_two_stage(two_stage, flow, True, two_stage.probabilities)


def build_so(
    two_stage: TwoStageInstance,
    flow: Flow = "u",
    probabilities: tuple[float, ...] | None = None,
) -> BuiltModel:
    """Expected-cost model: first-stage cost plus probability-weighted
    retrofit costs per scenario."""
    if not two_stage.scenarios:
        raise ValueError("stochastic model needs at least one scenario")
    rho = two_stage.probabilities if probabilities is None else tuple(probabilities)
    if len(rho) != two_stage.num_scenarios:
        raise ValueError("need one probability per scenario")
    return _build_two_stage(two_stage, flow, False, rho)


def build_model(
    kind: ModelKind,
    two_stage: TwoStageInstance,
    probabilities: tuple[float, ...] | None = None,
) -> BuiltModel:
    if kind.optimization == "do":
        return build_do(two_stage.first_stage, two_stage.existing, kind.flow)
    if kind.optimization == "ro":
        return build_ro(two_stage, kind.flow)
    return build_so(two_stage, kind.flow, probabilities)


ALL_KINDS = tuple(ModelKind(o, f) for o in ("do", "ro", "so") for f in ("u", "d"))


def _stage_size(inst: Instance, flow: Flow) -> tuple[int, int]:
    """Closed-form variable/constraint counts of one stage block."""
    total_edges = inst.graph.num_edges
    num_pipes = inst.pipes.num_pipe_types
    feas = len(inst.feasible_pipes)
    adm = len(inst.admissible_edges)
    arcs = 2 * adm
    active = len(_active_vertices(inst))
    groups = inst.terminals.groups
    sizes = [len(g) for g in groups]
    num_groups = len(groups)
    if flow == "u":
        commodities = sum(sizes) - num_groups
        num_vars = num_pipes * total_edges + commodities * feas * arcs
        num_cons = commodities * active + commodities * feas * adm
        return num_vars, num_cons
    tails = [sum(sizes[k - 1 :]) for k in range(1, num_groups + 1)]
    commodities_per_k = [t - 1 for t in tails]
    commodities = sum(commodities_per_k)
    earlier = [sum(sizes[: k - 1]) for k in range(1, num_groups + 1)]
    steiner_active = active - len(inst.terminals.all_terminals)
    num_vars = (
        num_pipes * total_edges
        + commodities * feas * arcs
        + num_groups * feas * arcs
        + feas * arcs
        + num_groups * (num_groups + 1) // 2
    )
    num_cons = (
        commodities * active  # flow conservation
        + commodities * feas * arcs  # flow activates arborescence arcs
        + feas * arcs  # one arborescence per arc
        + feas * adm  # one direction per edge
        + num_groups  # each group rooted once
        + max(num_groups - 2, 0) * (num_groups - 1) // 2  # root dominance
        + active  # one receiving pipe per vertex
        + sum(earlier[1:])  # no flow into earlier groups
        + commodities  # no flow out of a sink
        + steiner_active  # aggregate flow balance
        + sum(steiner_active + earlier[k - 1] + 1 for k in range(1, num_groups + 1))
        + feas * num_groups * (num_groups - 1) // 2  # later-root usage
    )
    return num_vars, num_cons


def expected_size(kind: ModelKind, two_stage: TwoStageInstance) -> tuple[int, int]:
    """Closed-form size of a built model, for cross-checking the builders."""
    first_vars, first_cons = _stage_size(two_stage.first_stage, kind.flow)
    if kind.optimization == "do":
        return first_vars, first_cons
    num_vars, num_cons = first_vars, first_cons
    pair_count = two_stage.first_stage.pipes.num_pipe_types * two_stage.first_stage.graph.num_edges
    for scenario in two_stage.scenarios:
        s_vars, s_cons = _stage_size(scenario, kind.flow)
        num_vars += s_vars
        num_cons += s_cons + pair_count  # linking rows
    if kind.optimization == "ro":
        num_vars += 1  # epigraph variable
        num_cons += two_stage.num_scenarios  # worst-case rows
    return num_vars, num_cons
