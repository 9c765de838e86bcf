"""Exogenous events as edits to a migration network, and before/after re-solves."""

from __future__ import annotations

from dataclasses import dataclass, replace

import yaml

from migrana.errors import InputError, TopologyError
from migrana.flow import FlowPlan, solve_min_cost_flow
from migrana.network import MigrationEdge, MigrationNetwork, MigrationNode, NodeRole

REMOVE = "remove"
EXTERNAL = "external"
DIFFICULTY_FLOOR = 1e-6


def external_difficulty(out_factor: float, t_i: float, r_next: float) -> float:
    """Route difficulty under an external multiplier: ``out * (t_i - r_next)``.

    The raw value may be negative; :func:`as_weight` clamps it before it is
    installed on an arc.
    """
    if not out_factor > 0:
        raise InputError(f"external factor must be positive, got {out_factor}")
    return out_factor * (t_i - r_next)


def as_weight(value: float, floor: float = DIFFICULTY_FLOOR) -> float:
    return value if value > floor else floor


@dataclass(frozen=True)
class NgoInsertion:
    """Relay node spliced between ``between[0]`` and ``between[1]``.

    ``in_arc`` and ``out_arc`` are ``(difficulty, capacity)``; capacity may be
    ``None`` for unbounded.
    """

    ngo_name: str
    between: tuple[str, str]
    in_arc: tuple[float, int | None]
    out_arc: tuple[float, int | None]
    keep_direct: bool = True

    def __post_init__(self):
        if len(self.between) != 2 or self.between[0] == self.between[1]:
            raise InputError(f"NGO {self.ngo_name!r} must sit between two distinct nodes")


@dataclass(frozen=True)
class ScenarioEvent:
    """Ordered edits applied as: difficulty edits, capacity edits, insertions.

    A difficulty edit is ``(from, to, value)`` where value is a number,
    ``REMOVE`` to delete the arc, or ``EXTERNAL`` to recompute it with
    :func:`external_difficulty` from the source's supply (or capacity) and
    the target's capacity, scaled by ``external_out_factor``.
    """

    name: str
    difficulty_edits: tuple = ()
    capacity_edits: tuple = ()
    node_insertions: tuple[NgoInsertion, ...] = ()
    external_out_factor: float = 1.0
    floor: float = DIFFICULTY_FLOOR

    def __post_init__(self):
        if not self.external_out_factor > 0:
            raise InputError(f"event {self.name!r}: external factor must be positive")
        for field_name in ("difficulty_edits", "capacity_edits", "node_insertions"):
            object.__setattr__(self, field_name, tuple(tuple(e) if isinstance(e, list) else e for e in getattr(self, field_name)))

    @property
    def kinds(self) -> set[str]:
        """Which matrices the event touches: 'cost', 'capacity', 'nodes'."""
        kinds = set()
        if self.difficulty_edits:
            kinds.add("cost")
        if self.capacity_edits:
            kinds.add("capacity")
        if self.node_insertions:
            kinds.add("nodes")
        return kinds


def _edge_index(edges: list[MigrationEdge], u: str, v: str, event: str) -> int:
    for i, e in enumerate(edges):
        if e.source == u and e.target == v:
            return i
    raise TopologyError(f"event {event!r}: no edge {u}->{v} to edit")


def apply_event(network: MigrationNetwork, event: ScenarioEvent) -> MigrationNetwork:
    """New network with the event's edits applied; ``network`` is left untouched."""
    edges = list(network.edges)
    for u, v, value in event.difficulty_edits:
        i = _edge_index(edges, u, v, event.name)
        if value == REMOVE:
            del edges[i]
            continue
        if value == EXTERNAL:
            src, dst = network.node(u), network.node(v)
            t_i = src.supply if src.role is NodeRole.EXPORTER else src.capacity
            value = as_weight(external_difficulty(event.external_out_factor, t_i, dst.capacity), event.floor)
        value = float(value)
        if value < 0:
            raise InputError(f"event {event.name!r}: negative difficulty on {u}->{v}")
        edges[i] = replace(edges[i], difficulty=value)
    for u, v, capacity in event.capacity_edits:
        i = _edge_index(edges, u, v, event.name)
        if capacity is not None and int(capacity) < 0:
            raise InputError(f"event {event.name!r}: negative capacity on {u}->{v}")
        edges[i] = replace(edges[i], capacity=None if capacity is None else int(capacity))
    result = replace(network, edges=tuple(edges))
    for insertion in event.node_insertions:
        result = insert_ngo_node(result, insertion)
    return result


def insert_ngo_node(network: MigrationNetwork, insertion: NgoInsertion) -> MigrationNetwork:
    u, v = insertion.between
    names = set(network.names)
    if insertion.ngo_name in names:
        raise InputError(f"node {insertion.ngo_name!r} already exists")
    for end in (u, v):
        if end not in names:
            raise TopologyError(f"NGO {insertion.ngo_name!r}: unknown endpoint {end!r}")
    edges = list(network.edges)
    if not insertion.keep_direct:
        edges = [e for e in edges if not (e.source == u and e.target == v)]
    d_in, c_in = insertion.in_arc
    d_out, c_out = insertion.out_arc
    edges.append(MigrationEdge(u, insertion.ngo_name, float(d_in), None if c_in is None else int(c_in)))
    edges.append(MigrationEdge(insertion.ngo_name, v, float(d_out), None if c_out is None else int(c_out)))
    nodes = network.nodes + (MigrationNode(insertion.ngo_name, NodeRole.TRANSIT),)
    return MigrationNetwork(nodes, tuple(edges))


@dataclass(frozen=True)
class StageResult:
    event: str
    network: MigrationNetwork
    plan: FlowPlan
    changed_arcs: tuple[tuple[str, str, int, int], ...]
    delta_cost: float


def plan_diff(before: FlowPlan, after: FlowPlan) -> tuple[tuple[tuple[str, str, int, int], ...], float]:
    """Arcs whose flow changed as ``(u, v, before, after)``, plus the cost change."""
    arcs = sorted(set(before.flows) | set(after.flows))
    changed = tuple(
        (u, v, before.flow(u, v), after.flow(u, v)) for u, v in arcs if before.flow(u, v) != after.flow(u, v)
    )
    return changed, after.total_cost - before.total_cost


def run_timeline(network: MigrationNetwork, events, baseline: FlowPlan | None = None) -> list[StageResult]:
    """Fold events over the network, re-solving after each one."""
    plan = baseline or solve_min_cost_flow(network)
    stages = []
    for event in events:
        network = apply_event(network, event)
        new_plan = solve_min_cost_flow(network)
        changed, delta = plan_diff(plan, new_plan)
        stages.append(StageResult(event.name, network, new_plan, changed, delta))
        plan = new_plan
    return stages


def _edit_value(raw):
    if isinstance(raw, str):
        if raw.lower() in (REMOVE, EXTERNAL):
            return raw.lower()
        raise InputError(f"unknown difficulty edit value {raw!r}")
    return float(raw)


def _capacity_value(raw):
    if raw is None or (isinstance(raw, str) and raw.lower() == "unbounded"):
        return None
    return int(raw)


def events_from_data(raw) -> list[ScenarioEvent]:
    if isinstance(raw, dict):
        raw = raw.get("events", [])
    if not isinstance(raw, list):
        raise InputError("scenario must be a list of events")
    events = []
    for i, item in enumerate(raw):
        try:
            name = str(item.get("name", f"event-{i + 1}"))
            difficulty = tuple(
                (str(e["from"]), str(e["to"]), _edit_value(e["difficulty"])) for e in item.get("difficulty_edits", [])
            )
            capacity = tuple(
                (str(e["from"]), str(e["to"]), _capacity_value(e["capacity"])) for e in item.get("capacity_edits", [])
            )
            insertions = tuple(
                NgoInsertion(
                    str(n["name"]),
                    (str(n["from"]), str(n["to"])),
                    (float(n["in_difficulty"]), _capacity_value(n.get("in_capacity"))),
                    (float(n["out_difficulty"]), _capacity_value(n.get("out_capacity"))),
                    bool(n.get("keep_direct", True)),
                )
                for n in item.get("node_insertions", [])
            )
            events.append(
                ScenarioEvent(
                    name,
                    difficulty,
                    capacity,
                    insertions,
                    float(item.get("external_out_factor", 1.0)),
                    float(item.get("floor", DIFFICULTY_FLOOR)),
                )
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise InputError(f"scenario event {i + 1}: malformed ({exc})") from None
    return events


def load_scenario(source) -> list[ScenarioEvent]:
    """Read an ordered list of events from YAML."""
    if hasattr(source, "read"):
        raw = yaml.safe_load(source)
    else:
        with open(source) as fh:
            raw = yaml.safe_load(fh)
    return events_from_data(raw)
