"""Combinatorial data model: graphs, pipe catalogs, terminal groups, instances.

All types are immutable after construction and safe to share across threads;
the operations at the bottom of the module are pure functions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

Edge = tuple[int, int]
PipeEdge = tuple[int, int]  # (pipe id, edge id)


class ValidationError(ValueError):
    """Instance data violates a structural invariant."""


class InfeasibleInstanceError(ValidationError):
    """A terminal group cannot be connected inside the admissible edge set."""


class UnionFind:
    """Disjoint sets over 0..n-1 with path compression and union by size."""

    def __init__(self, n: int) -> None:
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return
        if self.size[rx] < self.size[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        self.size[rx] += self.size[ry]

    def connected(self, x: int, y: int) -> bool:
        return self.find(x) == self.find(y)


@dataclass(frozen=True)
class Graph:
    """Undirected graph on vertices 1..num_vertices with an ordered edge list.

    Edge ids are positions in ``edges``.  Arcs are derived (both orientations
    of every edge), never stored.
    """

    num_vertices: int
    edges: tuple[Edge, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", tuple((int(u), int(v)) for u, v in self.edges))
        if self.num_vertices < 1:
            raise ValidationError("graph needs at least one vertex")
        seen: set[Edge] = set()
        for u, v in self.edges:
            if not (1 <= u < v <= self.num_vertices):
                raise ValidationError(f"edge ({u},{v}) violates 1 <= u < v <= {self.num_vertices}")
            if (u, v) in seen:
                raise ValidationError(f"duplicate edge ({u},{v})")
            seen.add((u, v))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def incident(self) -> tuple[tuple[int, ...], ...]:
        """Edge ids incident to each vertex; index 0 is unused."""
        inc: list[list[int]] = [[] for _ in range(self.num_vertices + 1)]
        for eid, (u, v) in enumerate(self.edges):
            inc[u].append(eid)
            inc[v].append(eid)
        return tuple(tuple(ids) for ids in inc)

    @cached_property
    def _edge_ids(self) -> dict[Edge, int]:
        return {edge: eid for eid, edge in enumerate(self.edges)}

    def edge_id(self, u: int, v: int) -> int:
        key = (u, v) if u < v else (v, u)
        try:
            return self._edge_ids[key]
        except KeyError:
            raise ValidationError(f"no edge between {u} and {v}") from None

    def endpoints(self, edge_id: int) -> Edge:
        if not 0 <= edge_id < len(self.edges):
            raise ValidationError(f"edge id {edge_id} out of range")
        return self.edges[edge_id]

    def arcs(self, edge_ids: Iterable[int] | None = None) -> Iterator[tuple[int, int, int]]:
        """Yield (tail, head, edge id) for both orientations of each edge."""
        ids = range(len(self.edges)) if edge_ids is None else edge_ids
        for eid in ids:
            u, v = self.edges[eid]
            yield u, v, eid
            yield v, u, eid

    def connected_vertex_count(self) -> int:
        """Number of vertices touched by at least one edge."""
        touched: set[int] = set()
        for u, v in self.edges:
            touched.add(u)
            touched.add(v)
        return len(touched)


@dataclass(frozen=True)
class PipeCatalog:
    """Available pipe types 1..num_pipe_types with per-(pipe, edge) base costs.

    ``base_costs[p-1][e]`` is the cost of installing pipe ``p`` on edge id
    ``e``; all costs are strictly positive.
    """

    num_pipe_types: int
    base_costs: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "base_costs", tuple(tuple(float(c) for c in row) for row in self.base_costs)
        )
        if self.num_pipe_types < 1:
            raise ValidationError("catalog needs at least one pipe type")
        if len(self.base_costs) != self.num_pipe_types:
            raise ValidationError("base_costs must have one row per pipe type")
        width = len(self.base_costs[0])
        for p, row in enumerate(self.base_costs, start=1):
            if len(row) != width:
                raise ValidationError("base_costs rows must have equal length")
            for e, c in enumerate(row):
                if not c > 0.0:
                    raise ValidationError(f"cost of pipe {p} on edge {e} must be positive, got {c}")

    def cost(self, pipe: int, edge_id: int) -> float:
        if not 1 <= pipe <= self.num_pipe_types:
            raise ValidationError(f"pipe id {pipe} out of range 1..{self.num_pipe_types}")
        row = self.base_costs[pipe - 1]
        if not 0 <= edge_id < len(row):
            raise ValidationError(f"edge id {edge_id} out of range")
        return row[edge_id]


@dataclass(frozen=True)
class TerminalGroups:
    """Pairwise-disjoint terminal groups; the root of each group is its
    minimum-index terminal so runs are reproducible."""

    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        norm = tuple(tuple(sorted(set(int(t) for t in g))) for g in self.groups)
        object.__setattr__(self, "groups", norm)
        if not norm:
            raise ValidationError("at least one terminal group is required")
        seen: set[int] = set()
        for k, group in enumerate(norm):
            if len(group) < 2:
                raise ValidationError(f"group {k} has {len(group)} terminal(s); need at least 2")
            overlap = seen.intersection(group)
            if overlap:
                raise ValidationError(f"groups overlap on vertices {sorted(overlap)}")
            seen.update(group)

    @property
    def num_groups(self) -> int:
        return len(self.groups)

    @cached_property
    def roots(self) -> tuple[int, ...]:
        return tuple(group[0] for group in self.groups)

    @cached_property
    def group_of(self) -> dict[int, int]:
        """Terminal vertex -> 0-based group index."""
        return {t: k for k, group in enumerate(self.groups) for t in group}

    @cached_property
    def all_terminals(self) -> frozenset[int]:
        return frozenset(self.group_of)

    def non_root_terminals(self) -> tuple[int, ...]:
        """All terminals except the group roots, ascending."""
        roots = set(self.roots)
        return tuple(sorted(t for t in self.group_of if t not in roots))


@dataclass(frozen=True)
class Instance:
    """One stage or scenario: graph, catalog, groups, feasibility and costs.

    ``cost_multiplier`` scales all base costs uniformly; it is 1 in the first
    stage and the inflation factor in second-stage scenarios.
    """

    graph: Graph
    pipes: PipeCatalog
    terminals: TerminalGroups
    feasible_pipes: frozenset[int]
    admissible_edges: frozenset[int]
    cost_multiplier: float = 1.0
    label: str = field(default="", compare=False)  # presentation only

    def __post_init__(self) -> None:
        object.__setattr__(self, "feasible_pipes", frozenset(int(p) for p in self.feasible_pipes))
        object.__setattr__(self, "admissible_edges", frozenset(int(e) for e in self.admissible_edges))
        if len(self.pipes.base_costs[0]) != self.graph.num_edges:
            raise ValidationError("catalog cost rows must cover every graph edge")
        if not self.feasible_pipes:
            raise ValidationError("feasible pipe set is empty")
        if not self.admissible_edges:
            raise ValidationError("admissible edge set is empty")
        for p in self.feasible_pipes:
            if not 1 <= p <= self.pipes.num_pipe_types:
                raise ValidationError(f"feasible pipe {p} out of range")
        for e in self.admissible_edges:
            if not 0 <= e < self.graph.num_edges:
                raise ValidationError(f"admissible edge id {e} out of range")
        if not self.cost_multiplier >= 1.0:
            raise ValidationError(f"cost multiplier must be >= 1, got {self.cost_multiplier}")
        for group in self.terminals.groups:
            for t in group:
                if not 1 <= t <= self.graph.num_vertices:
                    raise ValidationError(f"terminal {t} out of range")
        for k in range(self.terminals.num_groups):
            if not is_connected_within(self, k):
                raise InfeasibleInstanceError(
                    f"terminal group {k} ({self.terminals.groups[k]}) is disconnected "
                    "within the admissible edge set"
                )

    def pair_cost(self, pipe: int, edge_id: int) -> float:
        return self.cost_multiplier * self.pipes.cost(pipe, edge_id)

    def admissible_edges_sorted(self) -> tuple[int, ...]:
        return tuple(sorted(self.admissible_edges))

    def feasible_pipes_sorted(self) -> tuple[int, ...]:
        return tuple(sorted(self.feasible_pipes))


@dataclass(frozen=True)
class EdgePipeSet:
    """A set of (pipe id, edge id) pairs: the pre-existing set and solutions."""

    pairs: frozenset[PipeEdge] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "pairs", frozenset((int(p), int(e)) for p, e in self.pairs))

    @classmethod
    def from_vertex_pairs(cls, graph: Graph, items: Iterable[tuple[int, Edge]]) -> "EdgePipeSet":
        return cls(frozenset((p, graph.edge_id(u, v)) for p, (u, v) in items))

    def to_vertex_pairs(self, graph: Graph) -> list[tuple[int, Edge]]:
        return sorted((p, graph.endpoints(e)) for p, e in self.pairs)

    def check(self, graph: Graph, num_pipe_types: int) -> None:
        for p, e in self.pairs:
            if not 1 <= p <= num_pipe_types:
                raise ValidationError(f"pipe id {p} out of range 1..{num_pipe_types}")
            if not 0 <= e < graph.num_edges:
                raise ValidationError(f"edge id {e} out of range")

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[PipeEdge]:
        return iter(sorted(self.pairs))

    def __contains__(self, pair: PipeEdge) -> bool:
        return pair in self.pairs

    def __or__(self, other: "EdgePipeSet") -> "EdgePipeSet":
        return EdgePipeSet(self.pairs | other.pairs)

    def __sub__(self, other: "EdgePipeSet") -> "EdgePipeSet":
        return EdgePipeSet(self.pairs - other.pairs)

    def __and__(self, other: "EdgePipeSet") -> "EdgePipeSet":
        return EdgePipeSet(self.pairs & other.pairs)


@dataclass(frozen=True)
class TwoStageInstance:
    """A first-stage instance plus scenario instances with probabilities.

    All scenarios share the first stage's graph and pipe catalog; scenario
    multipliers are the (strictly > 1) second-stage inflation factors.
    """

    first_stage: Instance
    scenarios: tuple[Instance, ...]
    probabilities: tuple[float, ...]
    existing: EdgePipeSet = field(default_factory=EdgePipeSet)

    def __post_init__(self) -> None:
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        object.__setattr__(self, "probabilities", tuple(float(r) for r in self.probabilities))
        if len(self.scenarios) != len(self.probabilities):
            raise ValidationError("need one probability per scenario")
        if self.first_stage.cost_multiplier != 1.0:
            raise ValidationError("first-stage cost multiplier must be exactly 1")
        for s, inst in enumerate(self.scenarios):
            if inst.graph is not self.first_stage.graph:
                raise ValidationError(f"scenario {s} does not share the first-stage graph")
            if inst.pipes is not self.first_stage.pipes:
                raise ValidationError(f"scenario {s} does not share the pipe catalog")
            if not inst.cost_multiplier > 1.0:
                raise ValidationError(f"scenario {s} multiplier must be > 1")
        if self.scenarios:
            for s, rho in enumerate(self.probabilities):
                if rho < 0.0:
                    raise ValidationError(f"probability of scenario {s} is negative")
            if abs(sum(self.probabilities) - 1.0) > 1e-12:
                raise ValidationError(f"probabilities sum to {sum(self.probabilities)}, not 1")
        self.existing.check(self.first_stage.graph, self.first_stage.pipes.num_pipe_types)

    @property
    def num_scenarios(self) -> int:
        return len(self.scenarios)

    def with_probabilities(self, probabilities: Sequence[float]) -> "TwoStageInstance":
        return TwoStageInstance(self.first_stage, self.scenarios, tuple(probabilities), self.existing)


@dataclass(frozen=True)
class FeasibilityResult:
    ok: bool
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def cost(instance: Instance, existing: EdgePipeSet, solution: EdgePipeSet) -> float:
    """Total installation cost of ``solution``; pairs already in ``existing``
    are free.  Applies the instance's cost multiplier."""
    solution.check(instance.graph, instance.pipes.num_pipe_types)
    existing.check(instance.graph, instance.pipes.num_pipe_types)
    return sum(
        instance.pair_cost(p, e) for p, e in solution.pairs if (p, e) not in existing.pairs
    )


def vertices_connected(graph: Graph, vertices: Iterable[int], edge_ids: Iterable[int]) -> bool:
    """True iff all ``vertices`` lie in one component of the subgraph spanned
    by ``edge_ids``.  Vacuously true for fewer than two vertices."""
    targets = sorted(set(vertices))
    if len(targets) < 2:
        return True
    uf = UnionFind(graph.num_vertices + 1)
    for eid in edge_ids:
        u, v = graph.endpoints(eid)
        uf.union(u, v)
    root = uf.find(targets[0])
    return all(uf.find(t) == root for t in targets[1:])


def validate_feasible(instance: Instance, solution: EdgePipeSet) -> FeasibilityResult:
    """Check feasibility with union-find, independently of any MILP machinery.

    Pairs using infeasible pipes or inadmissible edges may be installed but
    cannot carry a terminal connection, so they are ignored here.
    """
    solution.check(instance.graph, instance.pipes.num_pipe_types)
    usable = [
        e
        for p, e in solution.pairs
        if p in instance.feasible_pipes and e in instance.admissible_edges
    ]
    uf = UnionFind(instance.graph.num_vertices + 1)
    for eid in usable:
        u, v = instance.graph.endpoints(eid)
        uf.union(u, v)
    for k, group in enumerate(instance.terminals.groups):
        root = uf.find(group[0])
        for t in group[1:]:
            if uf.find(t) != root:
                return FeasibilityResult(
                    False, f"group {k}: terminals {group[0]} and {t} are not connected"
                )
    return FeasibilityResult(True)


def is_connected_within(instance: Instance, group_index: int) -> bool:
    """True iff the group's terminals are connected in (V, admissible edges)."""
    if not 0 <= group_index < instance.terminals.num_groups:
        raise ValidationError(f"group index {group_index} out of range")
    return vertices_connected(
        instance.graph, instance.terminals.groups[group_index], instance.admissible_edges
    )
