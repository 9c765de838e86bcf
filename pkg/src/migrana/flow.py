"""Min-cost max-flow routing by successive shortest augmenting paths.

The solver keeps node potentials so that every residual arc has a
non-negative reduced cost ``cost + L[u] - L[v]``. Each round finds shortest
distances on those reduced costs with a label-correcting search, augments
along the lexicographically smallest shortest path, and then folds the
distances into the potentials.
"""

from __future__ import annotations

import math
from collections import deque
from collections.abc import Hashable, Sequence
from dataclasses import dataclass, field

import numpy as np

from migrana.errors import InputError, SolveError
from migrana.network import MigrationNetwork, NodeRole

SUPER_SOURCE = "__source__"
SUPER_SINK = "__sink__"
UNREACHABLE = math.inf


class ResidualNetwork:
    """Arc-list residual graph.

    Arcs are stored in pairs: arc ``i`` and its reverse ``i ^ 1``. ``cap[i]``
    holds the remaining capacity, so the flow on a forward arc is the
    remaining capacity of its reverse.
    """

    def __init__(self, nodes: Sequence[Hashable]):
        self.nodes = list(nodes)
        self.index = {n: i for i, n in enumerate(self.nodes)}
        if len(self.index) != len(self.nodes):
            raise InputError("duplicate node labels")
        self.tail: list[int] = []
        self.head: list[int] = []
        self.cap: list[int] = []
        self.cost: list[float] = []
        self.adj: list[list[int]] = [[] for _ in self.nodes]

    def add_arc(self, u, v, capacity: int, cost: float) -> int:
        if capacity < 0:
            raise InputError(f"negative capacity on arc {u}->{v}")
        if cost < 0:
            raise InputError(f"negative cost on arc {u}->{v}")
        iu, iv = self.index[u], self.index[v]
        i = len(self.head)
        for a, b, c, w in ((iu, iv, int(capacity), cost), (iv, iu, 0, -cost)):
            self.tail.append(a)
            self.head.append(b)
            self.cap.append(c)
            self.cost.append(w)
            self.adj[a].append(len(self.head) - 1)
        return i

    def flow(self, arc: int) -> int:
        return self.cap[arc ^ 1]

    def residual_arcs(self):
        """Yield ``(u, v, remaining capacity, cost)`` for arcs with capacity left."""
        for i, c in enumerate(self.cap):
            if c > 0:
                yield self.nodes[self.tail[i]], self.nodes[self.head[i]], c, self.cost[i]


@dataclass(frozen=True)
class MaxFlowResult:
    total_flow: int
    total_cost: float
    augmentations: int
    potentials: dict


def _label_correcting(net: ResidualNetwork, s: int, potentials: list[float]) -> list[float]:
    n = len(net.nodes)
    dist = [math.inf] * n
    dist[s] = 0.0
    queue = deque([s])
    queued = [False] * n
    queued[s] = True
    while queue:
        u = queue.popleft()
        queued[u] = False
        du = dist[u]
        for i in net.adj[u]:
            if net.cap[i] <= 0:
                continue
            v = net.head[i]
            reduced = net.cost[i] + potentials[u] - potentials[v]
            nd = du + max(reduced, 0.0)
            if nd < dist[v] - 1e-12 * max(1.0, nd):
                dist[v] = nd
                if not queued[v]:
                    queued[v] = True
                    queue.append(v)
    return dist


def _smallest_tight_path(net, s, t, dist, potentials, eps) -> list[int] | None:
    """Arc indices of the lexicographically smallest shortest s-t path."""
    tight_in: list[list[int]] = [[] for _ in net.nodes]
    tight_out: list[list[int]] = [[] for _ in net.nodes]
    for i, c in enumerate(net.cap):
        if c <= 0:
            continue
        u, v = net.tail[i], net.head[i]
        if dist[u] == math.inf or dist[v] == math.inf:
            continue
        reduced = net.cost[i] + potentials[u] - potentials[v]
        if abs(dist[u] + reduced - dist[v]) <= eps:
            tight_out[u].append(i)
            tight_in[v].append(i)

    reaches_t = {t}
    stack = [t]
    while stack:
        v = stack.pop()
        for i in tight_in[v]:
            u = net.tail[i]
            if u not in reaches_t:
                reaches_t.add(u)
                stack.append(u)
    if s not in reaches_t:
        return None

    for u in range(len(net.nodes)):
        tight_out[u].sort(key=lambda i: (net.head[i], i))
    visited = {s}
    path: list[int] = []

    def dfs(u):
        if u == t:
            return True
        for i in tight_out[u]:
            v = net.head[i]
            if v in visited or v not in reaches_t:
                continue
            visited.add(v)
            path.append(i)
            if dfs(v):
                return True
            path.pop()
        return False

    return path if dfs(s) else None


def min_cost_max_flow(net: ResidualNetwork, source, sink) -> MaxFlowResult:
    """Push a maximum flow of minimum cost from ``source`` to ``sink`` in place."""
    s, t = net.index[source], net.index[sink]
    potentials = [0.0] * len(net.nodes)
    scale = max([abs(c) for c in net.cost] + [1.0])
    eps = 1e-12 * scale * max(1, len(net.nodes))
    augmentations = 0
    while True:
        dist = _label_correcting(net, s, potentials)
        if dist[t] == math.inf:
            break
        path = _smallest_tight_path(net, s, t, dist, potentials, eps)
        if path is None:
            raise SolveError("shortest path lost during tie-breaking")
        push = min(net.cap[i] for i in path)
        for i in path:
            net.cap[i] -= push
            net.cap[i ^ 1] += push
        augmentations += 1
        d_t = dist[t]
        potentials = [p + min(d, d_t) for p, d in zip(potentials, dist)]

    forward = range(0, len(net.cap), 2)
    total_flow = sum(net.flow(i) for i in forward if net.tail[i] == s) - sum(
        net.flow(i) for i in forward if net.head[i] == s
    )
    total_cost = sum(net.flow(i) * net.cost[i] for i in range(0, len(net.cap), 2))
    return MaxFlowResult(
        total_flow,
        total_cost,
        augmentations,
        {n: p for n, p in zip(net.nodes, potentials)},
    )


@dataclass(frozen=True)
class FlowPlan:
    """Solved flow on a migration network.

    ``arcs`` lists every arc of the solved model, including the virtual
    super-source and super-sink arcs, as ``(u, v, capacity, cost, flow)``.
    """

    flows: dict
    total_flow: int
    total_cost: float
    augmentations: int
    unrouted: int
    potentials: dict
    arcs: tuple
    supplies: dict = field(default_factory=dict)

    def flow(self, source: str, target: str) -> int:
        return self.flows.get((source, target), 0)

    def residual_arcs(self):
        for u, v, cap, cost, f in self.arcs:
            if f < cap:
                yield u, v, cap - f, cost
            if f > 0:
                yield v, u, f, -cost

    def routed(self, country: str) -> int:
        return sum(f for u, v, _, _, f in self.arcs if u == SUPER_SOURCE and v == country)


def solve_min_cost_flow(network: MigrationNetwork) -> FlowPlan:
    """Route exporter supply to importer capacity at minimum total difficulty.

    Exporters hang off a virtual super-source (arc capacity = supply) and
    importers feed a virtual super-sink (arc capacity = acceptance capacity).
    Unbounded arcs are capped at the total supply. Supply that cannot reach
    any importer is reported in ``unrouted``.
    """
    supply = network.total_supply
    if not network.exporters or supply <= 0:
        raise SolveError("empty supply: network has no exporter with positive supply")
    if not network.importers or network.total_capacity <= 0:
        raise SolveError("no capacity: network has no importer with positive capacity")
    for e in network.edges:
        if e.difficulty < 0:
            raise InputError(f"negative difficulty on edge {e.source}->{e.target}")

    order = [SUPER_SOURCE] + sorted(network.names) + [SUPER_SINK]
    net = ResidualNetwork(order)
    arc_ids = []
    for node in sorted(network.nodes, key=lambda n: n.country):
        if node.role is NodeRole.EXPORTER and node.supply > 0:
            arc_ids.append(net.add_arc(SUPER_SOURCE, node.country, node.supply, 0.0))
    for e in sorted(network.edges, key=lambda e: e.pair):
        cap = supply if e.capacity is None else min(e.capacity, supply)
        arc_ids.append(net.add_arc(e.source, e.target, cap, float(e.difficulty)))
    for node in sorted(network.nodes, key=lambda n: n.country):
        if node.role is NodeRole.IMPORTER and node.capacity > 0:
            arc_ids.append(net.add_arc(node.country, SUPER_SINK, node.capacity, 0.0))

    result = min_cost_max_flow(net, SUPER_SOURCE, SUPER_SINK)
    arcs = tuple(
        (net.nodes[net.tail[i]], net.nodes[net.head[i]], net.cap[i] + net.flow(i), net.cost[i], net.flow(i))
        for i in arc_ids
    )
    flows = {(e.source, e.target): 0 for e in network.edges}
    for u, v, _, _, f in arcs:
        if (u, v) in flows:
            flows[(u, v)] = f
    return FlowPlan(
        flows=flows,
        total_flow=result.total_flow,
        total_cost=result.total_cost,
        augmentations=result.augmentations,
        unrouted=supply - result.total_flow,
        potentials=result.potentials,
        arcs=arcs,
        supplies={n.country: n.supply for n in network.exporters},
    )


@dataclass(frozen=True)
class DistanceMatrix:
    names: tuple[str, ...]
    values: np.ndarray

    def get(self, source: str, target: str) -> float:
        return float(self.values[self.names.index(source), self.names.index(target)])


def all_pairs_shortest(network: MigrationNetwork) -> DistanceMatrix:
    """Floyd-Warshall over edge difficulties; unreachable pairs hold ``UNREACHABLE``."""
    names = tuple(network.names)
    pos = {n: i for i, n in enumerate(names)}
    d = np.full((len(names), len(names)), UNREACHABLE)
    np.fill_diagonal(d, 0.0)
    for e in network.edges:
        i, j = pos[e.source], pos[e.target]
        d[i, j] = min(d[i, j], e.difficulty)
    for k in range(len(names)):
        d = np.minimum(d, d[:, k, None] + d[None, k, :])
    d.setflags(write=False)
    return DistanceMatrix(names, d)


@dataclass(frozen=True)
class Route:
    path: tuple[str, ...]
    difficulty: float
    flow: int
    priority: float
    fraction: float
    persons: int


@dataclass(frozen=True)
class RouteAllocation:
    source: str
    routes: tuple[Route, ...] = ()

    @property
    def total(self) -> int:
        return sum(r.persons for r in self.routes)


def route_fractions(priorities: Sequence[float]) -> list[float]:
    """Normalize positive route priorities into fractions summing to one."""
    q = [float(p) for p in priorities]
    if any(not p > 0 for p in q):
        raise InputError("route priorities must be positive")
    total = math.fsum(q)
    return [p / total for p in q]


def largest_remainder(fractions: Sequence[float], total: int) -> list[int]:
    """Integer split of ``total`` proportional to ``fractions``; ties go to earlier entries."""
    raw = [f * total for f in fractions]
    floors = [math.floor(r) for r in raw]
    left = total - sum(floors)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - floors[i]), i))
    for i in order[:left]:
        floors[i] += 1
    return floors


def decompose(plan: FlowPlan) -> list[tuple[tuple[str, ...], int]]:
    """Peel the plan into super-source to super-sink paths.

    Paths are taken in decreasing bottleneck order; among equally wide paths
    the lexicographically smallest node sequence goes first. Flow left on
    cycles is ignored.
    """
    remaining: dict[tuple[str, str], int] = {}
    for u, v, _, _, f in plan.arcs:
        if f > 0:
            remaining[(u, v)] = remaining.get((u, v), 0) + f
    paths: list[tuple[tuple[str, ...], int]] = []
    while True:
        found = None
        for width in sorted(set(remaining.values()), reverse=True):
            found = _smallest_path(remaining, width)
            if found:
                break
        if not found:
            return paths
        push = min(remaining[(a, b)] for a, b in zip(found, found[1:]))
        for a, b in zip(found, found[1:]):
            remaining[(a, b)] -= push
            if remaining[(a, b)] == 0:
                del remaining[(a, b)]
        paths.append((tuple(found), push))


def _node_key(n: str):
    return (n == SUPER_SINK, n != SUPER_SOURCE, n)


def _smallest_path(remaining, width) -> list[str] | None:
    out: dict[str, list[str]] = {}
    for (u, v), f in remaining.items():
        if f >= width:
            out.setdefault(u, []).append(v)
    for u in out:
        out[u].sort(key=_node_key)
    visited = {SUPER_SOURCE}
    path = [SUPER_SOURCE]

    def dfs(u):
        if u == SUPER_SINK:
            return True
        for v in out.get(u, ()):
            if v in visited:
                continue
            visited.add(v)
            path.append(v)
            if dfs(v):
                return True
            path.pop()
        return False

    return path if dfs(SUPER_SOURCE) else None


def allocate_routes(source: str, plan: FlowPlan) -> RouteAllocation:
    """Split the persons routed out of ``source`` across its flow paths.

    Each path's priority is the inverse of its summed difficulty and its
    fraction is that priority over the sum of priorities; persons are the
    fractions of the routed total, rounded by largest remainder.
    """
    costs = {(u, v): c for u, v, _, c, _ in plan.arcs}
    merged: dict[tuple[str, ...], int] = {}
    for path, f in decompose(plan):
        if path[1] != source:
            continue
        countries = tuple(p for p in path if p not in (SUPER_SOURCE, SUPER_SINK))
        merged[countries] = merged.get(countries, 0) + f
    if not merged:
        return RouteAllocation(source)

    items = list(merged.items())
    difficulties = [math.fsum(costs[(a, b)] for a, b in zip(p, p[1:])) for p, _ in items]
    if any(d <= 0 for d in difficulties):
        raise InputError(f"route out of {source!r} has zero difficulty; priority undefined")
    priorities = [1.0 / d for d in difficulties]
    fractions = route_fractions(priorities)
    routed = sum(f for _, f in items)
    persons = largest_remainder(fractions, routed)
    routes = tuple(
        Route(p, d, f, q, frac, n)
        for (p, f), d, q, frac, n in zip(items, difficulties, priorities, fractions, persons)
    )
    return RouteAllocation(source, routes)
