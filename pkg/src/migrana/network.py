"""Country roles, acceptance capacities, edge difficulties and network assembly."""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from importlib import resources

import yaml

from migrana.countries import CountryTable
from migrana.errors import InputError, TopologyError
from migrana.scoring import DistributionScore


class NodeRole(str, Enum):
    EXPORTER = "exporter"
    IMPORTER = "importer"
    TRANSIT = "transit"


class EdgeKind(str, Enum):
    EXPORTER_IMPORTER = "exporter->importer"
    EXPORTER_EXPORTER = "exporter->exporter"
    IMPORTER_IMPORTER = "importer->importer"


@dataclass(frozen=True)
class MigrationNode:
    country: str
    role: NodeRole
    score: float = 0.0
    supply: int = 0
    capacity: int = 0


@dataclass(frozen=True)
class MigrationEdge:
    """Directed arc. ``capacity=None`` means unbounded."""

    source: str
    target: str
    difficulty: float
    capacity: int | None = None

    @property
    def pair(self) -> tuple[str, str]:
        return (self.source, self.target)


@dataclass(frozen=True)
class MigrationNetwork:
    nodes: tuple[MigrationNode, ...]
    edges: tuple[MigrationEdge, ...] = ()

    def __post_init__(self):
        nodes = tuple(self.nodes)
        edges = tuple(self.edges)
        names = [n.country for n in nodes]
        if len(set(names)) != len(names):
            raise InputError("duplicate node names in network")
        known = set(names)
        pairs = set()
        for e in edges:
            if e.source not in known or e.target not in known:
                missing = e.source if e.source not in known else e.target
                raise TopologyError(f"edge {e.source}->{e.target} references unknown node {missing!r}")
            if e.source == e.target:
                raise TopologyError(f"self-loop on {e.source!r}")
            if e.pair in pairs:
                raise TopologyError(f"duplicate edge {e.source}->{e.target}")
            pairs.add(e.pair)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)

    @property
    def names(self) -> list[str]:
        return [n.country for n in self.nodes]

    def node(self, country: str) -> MigrationNode:
        for n in self.nodes:
            if n.country == country:
                return n
        raise KeyError(country)

    def edge(self, source: str, target: str) -> MigrationEdge:
        for e in self.edges:
            if e.source == source and e.target == target:
                return e
        raise KeyError((source, target))

    def has_edge(self, source: str, target: str) -> bool:
        return any(e.source == source and e.target == target for e in self.edges)

    @property
    def exporters(self) -> list[MigrationNode]:
        return [n for n in self.nodes if n.role is NodeRole.EXPORTER]

    @property
    def importers(self) -> list[MigrationNode]:
        return [n for n in self.nodes if n.role is NodeRole.IMPORTER]

    @property
    def total_supply(self) -> int:
        return sum(n.supply for n in self.nodes)

    @property
    def total_capacity(self) -> int:
        return sum(n.capacity for n in self.nodes)


@dataclass(frozen=True)
class TopologyEdge:
    source: str
    target: str
    difficulty: float | None = None
    capacity: int | None = None


def classify_roles(scores: Iterable[DistributionScore], threshold: float = 0.0) -> dict[str, NodeRole]:
    """Exporter below ``-threshold``, importer above ``+threshold``, transit otherwise."""
    if threshold < 0:
        raise InputError("classification threshold must be non-negative")
    roles = {}
    for s in scores:
        if not math.isfinite(s.f):
            raise InputError(f"score for {s.country!r} is not finite")
        if s.f < -threshold:
            roles[s.country] = NodeRole.EXPORTER
        elif s.f > threshold:
            roles[s.country] = NodeRole.IMPORTER
        else:
            roles[s.country] = NodeRole.TRANSIT
    return roles


def _round_half_up(x: float) -> int:
    return int(Decimal(repr(x)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def acceptance_capacity(n_real: float, f: float) -> int:
    """Refugees a country can still absorb: ``n_real * f / (1 - f)``, rounded half up.

    Non-positive scores accept nobody.
    """
    if n_real < 0:
        raise InputError(f"refugee count must be non-negative, got {n_real}")
    if f >= 1:
        raise InputError(f"capacity undefined for score f={f} >= 1")
    if f <= 0:
        return 0
    return _round_half_up(n_real * f / (1.0 - f))


def edge_difficulty(
    kind: EdgeKind | str,
    t_i: float | None = None,
    t_next: float | None = None,
    r_i: float | None = None,
    r_next: float | None = None,
    edge: str = "",
) -> float:
    """Cost weight of an arc from supplies ``t`` and capacities ``r`` of its endpoints.

    exporter->importer: t_i / r_next; exporter->exporter: t_next / t_i;
    importer->importer: r_i / r_next.
    """
    kind = EdgeKind(kind)
    if kind is EdgeKind.EXPORTER_IMPORTER:
        num, den = t_i, r_next
    elif kind is EdgeKind.EXPORTER_EXPORTER:
        num, den = t_next, t_i
    else:
        num, den = r_i, r_next
    if num is None or den is None:
        raise InputError(f"edge {edge or kind.value}: missing operand for {kind.value} difficulty")
    if den <= 0:
        raise TopologyError(f"edge {edge or kind.value}: zero denominator in {kind.value} difficulty")
    return num / den


def _edge_kind(src: MigrationNode, dst: MigrationNode) -> EdgeKind | None:
    pair = (src.role, dst.role)
    if pair == (NodeRole.EXPORTER, NodeRole.IMPORTER):
        return EdgeKind.EXPORTER_IMPORTER
    if pair == (NodeRole.EXPORTER, NodeRole.EXPORTER):
        return EdgeKind.EXPORTER_EXPORTER
    if pair == (NodeRole.IMPORTER, NodeRole.IMPORTER):
        return EdgeKind.IMPORTER_IMPORTER
    return None


def build_network(
    table: CountryTable,
    scores: Iterable[DistributionScore],
    topology: Iterable[TopologyEdge | tuple],
    threshold: float = 0.0,
    supply_overrides: Mapping[str, int] | None = None,
) -> MigrationNetwork:
    """Assemble the flow network.

    Every scored country becomes a node. Exporters supply their current
    refugee count (``x6``) unless overridden; importers get the acceptance
    capacity. Arc difficulty follows the endpoint roles, and arc capacity
    defaults to the target's acceptance capacity for importer targets
    (unbounded otherwise). Explicit values on a topology edge win.
    """
    scores = list(scores)
    roles = classify_roles(scores, threshold)
    supply_overrides = dict(supply_overrides or {})

    nodes = []
    for s in scores:
        role = roles[s.country]
        supply = capacity = 0
        if role is not NodeRole.TRANSIT:
            if s.country in table:
                n_real = table.get(s.country).x6
            elif role is NodeRole.EXPORTER and s.country in supply_overrides:
                n_real = None
            else:
                raise InputError(f"{s.country!r} is an {role.value} but has no indicator record")
            if role is NodeRole.EXPORTER:
                supply = int(supply_overrides.get(s.country, n_real))
            else:
                capacity = acceptance_capacity(n_real, s.f)
        nodes.append(MigrationNode(s.country, role, s.f, supply, capacity))
    by_name = {n.country: n for n in nodes}

    edges = []
    for item in topology:
        te = item if isinstance(item, TopologyEdge) else TopologyEdge(*item)
        for end in (te.source, te.target):
            if end not in by_name:
                raise TopologyError(f"topology edge {te.source}->{te.target}: unknown country {end!r}")
        src, dst = by_name[te.source], by_name[te.target]
        label = f"{te.source}->{te.target}"
        if te.difficulty is not None:
            difficulty = float(te.difficulty)
        else:
            kind = _edge_kind(src, dst)
            if kind is None:
                raise TopologyError(
                    f"edge {label}: no difficulty formula for {src.role.value}->{dst.role.value}"
                )
            difficulty = edge_difficulty(
                kind, t_i=src.supply, t_next=dst.supply, r_i=src.capacity, r_next=dst.capacity, edge=label
            )
        if te.capacity is not None:
            capacity = int(te.capacity)
        elif dst.role is NodeRole.IMPORTER:
            capacity = dst.capacity
        else:
            capacity = None
        edges.append(MigrationEdge(te.source, te.target, difficulty, capacity))
    return MigrationNetwork(tuple(nodes), tuple(edges))


def with_edges(network: MigrationNetwork, edges) -> MigrationNetwork:
    return replace(network, edges=tuple(edges))


def load_topology(source) -> list[TopologyEdge]:
    """Read a YAML topology: a list of ``{from, to, difficulty?, capacity?}``.

    A top-level mapping with an ``edges`` key is accepted as well.
    """
    if hasattr(source, "read"):
        raw = yaml.safe_load(source)
    else:
        with open(source) as fh:
            raw = yaml.safe_load(fh)
    if isinstance(raw, dict):
        raw = raw.get("edges", [])
    if not isinstance(raw, list):
        raise InputError("topology must be a list of edges")
    edges = []
    for i, item in enumerate(raw):
        try:
            edges.append(
                TopologyEdge(
                    str(item["from"]),
                    str(item["to"]),
                    None if item.get("difficulty") is None else float(item["difficulty"]),
                    None if item.get("capacity") is None else int(item["capacity"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"topology entry {i}: malformed ({exc})") from None
    return edges


def default_topology() -> list[TopologyEdge]:
    """The six Mediterranean and Balkan corridors shipped with the package."""
    with resources.files("migrana.data").joinpath("six_routes.yaml").open("r") as fh:
        return load_topology(fh)


def load_scores(source) -> list[DistributionScore]:
    """Read ``country,f`` rows (``#`` comments allowed)."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    rows = list(csv.DictReader(io.StringIO("\n".join(lines))))
    if not rows or "country" not in rows[0] or "f" not in rows[0]:
        raise InputError("scores file needs a header with columns country,f")
    scores = []
    for i, row in enumerate(rows, start=1):
        try:
            scores.append(DistributionScore(row["country"].strip(), float(row["f"])))
        except (TypeError, ValueError):
            raise InputError(f"scores row {i}: malformed score {row.get('f')!r}") from None
    return scores


def bundled_scores() -> list[DistributionScore]:
    with resources.files("migrana.data").joinpath("table_4_1_scores.csv").open("r") as fh:
        return load_scores(fh)


def bundled_supplies() -> dict[str, int]:
    with resources.files("migrana.data").joinpath("table_4_2_supplies.csv").open("r") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln and not ln.startswith("#")]
    return {c: int(v) for c, v in (ln.split(",") for ln in lines[1:])}
