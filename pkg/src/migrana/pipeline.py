"""End-to-end driver: ingest, score, build, solve, report."""

from __future__ import annotations

import contextlib
import csv
import dataclasses
import hashlib
import io
import json
import logging
import os
import platform
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from migrana.countries import load_country_table, validate_table
from migrana.dynamics import (
    EnvironmentalSeries,
    Neighbor,
    PopulationState,
    TransitionMatrix,
    evolve_population,
    fit_control_ability,
    power_iterate,
    reallocation_shares,
    resource_gap,
)
from migrana.errors import InputError, MigranaError
from migrana.flow import FlowPlan, allocate_routes, solve_min_cost_flow
from migrana.network import (
    MigrationNetwork,
    NodeRole,
    build_network,
    load_scores,
    load_topology,
)
from migrana.perturbation import load_scenario, run_timeline
from migrana.scoring import CoefficientPreset, DistributionScorer, get_preset, load_presets

log = logging.getLogger(__name__)

BUNDLED_KEY = "bundled"
BUNDLED = {
    "data": "table_3_1.csv",
    "topology": "six_routes.yaml",
    "scores": "table_4_1_scores.csv",
    "supplies": "table_4_2_supplies.csv",
}


def fmt(x) -> str:
    """CSV number format: integers verbatim, floats to 6 significant digits."""
    if x is None:
        return "unbounded"
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.6g}"


@dataclass
class PipelineConfig:
    data: str = BUNDLED_KEY
    topology: str = BUNDLED_KEY
    scores: str = BUNDLED_KEY
    supplies: str = BUNDLED_KEY
    preset: str | dict = "reduced"
    presets_file: str | None = None
    threshold: float = 0.0
    enter_p: float = 0.05
    exit_p: float = 0.10
    scenario: str | None = None
    dynamics: str | None = None
    out: str | None = None
    seed: int = 0

    @classmethod
    def from_mapping(cls, raw: dict, base_dir: str | os.PathLike = ".") -> "PipelineConfig":
        if "config" in raw and isinstance(raw["config"], dict):
            raw = raw["config"]
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise InputError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        values = dict(raw)
        for key in ("data", "topology", "scores", "supplies", "scenario", "dynamics", "presets_file", "out"):
            v = values.get(key)
            if isinstance(v, str) and v not in (BUNDLED_KEY, "preset", "none") and not os.path.isabs(v):
                values[key] = os.path.normpath(os.path.join(base_dir, v))
        return cls(**values)

    def resolved(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("data", "topology", "scores", "supplies", "scenario", "dynamics", "presets_file"):
            v = d[key]
            if isinstance(v, str) and v not in (BUNDLED_KEY, "preset", "none"):
                d[key] = os.path.abspath(v)
        d.pop("out")
        return d


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise InputError(f"config file not found: {path}")
    with open(path) as fh:
        raw = (json.load(fh) if path.suffix == ".json" else yaml.safe_load(fh)) or {}
    if not isinstance(raw, dict):
        raise InputError(f"{path}: config must be a mapping")
    return PipelineConfig.from_mapping(raw, path.parent)


@contextlib.contextmanager
def stage(name: str):
    """Tag any package error raised inside with the pipeline stage."""
    try:
        yield
    except MigranaError as exc:
        if getattr(exc, "stage", "migrana") == "migrana":
            exc.stage = name
        raise
    except FileNotFoundError as exc:
        err = InputError(f"file not found: {exc.filename}")
        err.stage = name
        raise err from None


def _open_input(value: str, key: str):
    if value == BUNDLED_KEY:
        return resources.files("migrana.data").joinpath(BUNDLED[key]).open("rb")
    if not os.path.exists(value):
        raise InputError(f"{key} file not found: {value}")
    return open(value, "rb")


def _input_bytes(value: str | None, key: str) -> bytes | None:
    if value in (None, "preset", "none"):
        return None
    with _open_input(value, key) as fh:
        return fh.read()


@dataclass
class ReportBundle:
    files: dict[str, str] = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)
    network: MigrationNetwork | None = None
    plan: FlowPlan | None = None
    stages: list = field(default_factory=list)

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in self.files.items():
            (out / name).write_text(text, encoding="utf-8", newline="")
        (out / "manifest.json").write_text(json.dumps(self.manifest, indent=2, sort_keys=True) + "\n")
        return out


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (int, float, np.number)) or v is None else v for v in row])
    return buf.getvalue()


def _dot_id(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_graph(plan: FlowPlan | None, network: MigrationNetwork) -> str:
    """DOT text: nodes annotated with role and supply/capacity, arcs with
    ``flow/capacity @ difficulty``. Without a plan only nodes are emitted."""
    lines = ["digraph migration {", "  rankdir=LR;"]
    for node in sorted(network.nodes, key=lambda n: n.country):
        if node.role is NodeRole.EXPORTER:
            detail = f"supply {node.supply}"
        elif node.role is NodeRole.IMPORTER:
            detail = f"capacity {node.capacity}"
        else:
            detail = "relay"
        label = f"{node.country}\\n{node.role.value}: {detail}"
        lines.append(f'  {_dot_id(node.country)} [role="{node.role.value}", label="{label}"];')
    if plan is not None:
        for e in sorted(network.edges, key=lambda e: e.pair):
            f = plan.flow(e.source, e.target)
            cap = "inf" if e.capacity is None else str(e.capacity)
            label = f"{f}/{cap} @ {fmt(float(e.difficulty))}"
            lines.append(f'  {_dot_id(e.source)} -> {_dot_id(e.target)} [label="{label}", flow={f}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def flows_csv(plan: FlowPlan, network: MigrationNetwork) -> str:
    rows = [
        (e.source, e.target, float(e.difficulty), e.capacity, plan.flow(e.source, e.target))
        for e in sorted(network.edges, key=lambda e: e.pair)
    ]
    return to_csv(["from", "to", "difficulty", "capacity", "flow"], rows)


def prepare_network(config: PipelineConfig) -> tuple[MigrationNetwork, list, dict]:
    """Load inputs and build the network; returns it with the scores and input digests."""
    digests = {}
    with stage("load"):
        raw = _input_bytes(config.data, "data")
        digests["data"] = hashlib.sha256(raw).hexdigest()
        table = load_country_table(io.BytesIO(raw))
        report = validate_table(table)
        if not report.ok:
            row, col, reason = report.errors[0]
            raise InputError(f"data row {row}, column {col}: {reason} ({len(report.errors)} error(s))")
        for w in report.warnings:
            log.warning("data row %s, column %s: %s", *w)

    with stage("score"):
        if config.scores == "preset":
            scores = DistributionScorer(resolve_preset(config)).score_table(table)
        else:
            raw_scores = _input_bytes(config.scores, "scores")
            digests["scores"] = hashlib.sha256(raw_scores).hexdigest()
            scores = load_scores(io.BytesIO(raw_scores))
        if config.presets_file:
            digests["presets_file"] = hashlib.sha256(Path(config.presets_file).read_bytes()).hexdigest()

    with stage("build"):
        raw_topo = _input_bytes(config.topology, "topology")
        digests["topology"] = hashlib.sha256(raw_topo).hexdigest()
        topology = load_topology(io.BytesIO(raw_topo))
        supplies = {}
        raw_sup = _input_bytes(config.supplies, "supplies")
        if raw_sup is not None:
            digests["supplies"] = hashlib.sha256(raw_sup).hexdigest()
            supplies = _read_supplies(raw_sup)
        network = build_network(table, scores, topology, config.threshold, supplies)
    return network, scores, digests


def resolve_preset(config: PipelineConfig) -> CoefficientPreset:
    """Named preset, or custom coefficients given as ``{intercept, weights}``."""
    if isinstance(config.preset, dict):
        try:
            return CoefficientPreset("custom", float(config.preset["intercept"]), config.preset.get("weights", {}))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"custom preset is malformed ({exc})") from None
    extra = load_presets(config.presets_file) if config.presets_file else None
    return get_preset(config.preset, extra)


def _read_supplies(raw: bytes) -> dict[str, int]:
    lines = [ln for ln in raw.decode("utf-8").splitlines() if ln.strip() and not ln.startswith("#")]
    reader = csv.DictReader(io.StringIO("\n".join(lines)))
    try:
        return {row["country"].strip(): int(row["supply"].replace(",", "")) for row in reader}
    except (KeyError, ValueError, AttributeError):
        raise InputError("supplies file needs columns country,supply with integer supplies") from None


def run_dynamics(spec: dict, seed: int = 0) -> dict[str, str]:
    """Evaluate a dynamics block; returns CSV documents keyed by file name."""
    files = {}
    if "series" in spec:
        series = EnvironmentalSeries.from_mapping(spec["series"])
        fits = [(f, fit_control_ability(series, f)) for f in ("medical", "resource")]
        files["control_fits.csv"] = to_csv(
            ["factor", "slope", "intercept"], [(f, fit.slope, fit.intercept) for f, fit in fits]
        )
    if "neighbors" in spec:
        neighbors = [
            Neighbor(str(n["country"]), float(n["refugee_change_rate"]), tuple(float(r) for r in n["env_change_rates"]))
            for n in spec["neighbors"]
        ]
        shares = reallocation_shares(neighbors)
        rows = [(n.country, n.surplus, shares[n.country]) for n in neighbors]
        if "deficit" in spec:
            d = spec["deficit"]
            gap = resource_gap(float(d["refugee_change_rate"]), [float(r) for r in d["env_change_rates"]])
            rows.append((f"{d.get('country', 'deficit')} (gap)", gap, 0.0))
        files["shares.csv"] = to_csv(["country", "surplus", "share"], rows)
    if "transition" in spec:
        a = TransitionMatrix(np.array(spec["transition"], dtype=float))
        x0 = PopulationState(tuple(spec.get("x0", [1.0] + [0.0] * (a.n_states - 1))))
        steps = int(spec.get("steps", 50))
        trajectory = evolve_population(a, x0, steps)
        header = ["step"] + (["x_a", "x_b"] if a.n_states == 2 else [f"x{i}" for i in range(a.n_states)])
        files["trajectory.csv"] = to_csv(header, [(k, *s.fractions) for k, s in enumerate(trajectory)])
        tol = float(spec.get("tol", 1e-10))
        rng = np.random.default_rng(seed)
        rows = []
        starts = [x0] + [PopulationState(tuple(rng.dirichlet(np.ones(a.n_states)))) for _ in range(int(spec.get("starts", 3)))]
        for i, start in enumerate(starts):
            state, iters = power_iterate(a, start, tol)
            rows.append((i, iters, *state.fractions))
        files["steady_state.csv"] = to_csv(["start", "iterations"] + header[1:], rows)
    return files


def run_pipeline(config: PipelineConfig) -> ReportBundle:
    """Run every configured stage and collect the report files.

    Writes to ``config.out`` when set. The CSV documents depend only on the
    inputs, so repeated runs produce identical bytes.
    """
    network, scores, digests = prepare_network(config)
    bundle = ReportBundle(network=network)
    roles = {n.country: n.role for n in network.nodes}
    bundle.files["scores.csv"] = to_csv(["country", "f", "role"], [(s.country, s.f, roles[s.country].value) for s in scores])
    bundle.files["nodes.csv"] = to_csv(
        ["country", "role", "score", "supply", "capacity"],
        [(n.country, n.role.value, n.score, n.supply, n.capacity) for n in network.nodes],
    )

    with stage("solve"):
        plan = solve_min_cost_flow(network)
    bundle.plan = plan
    bundle.files["flows.csv"] = flows_csv(plan, network)
    bundle.files["plan.dot"] = export_graph(plan, network)
    bundle.files["summary.csv"] = to_csv(
        ["metric", "value"],
        [
            ("total_flow", plan.total_flow),
            ("total_cost", float(plan.total_cost)),
            ("unrouted", plan.unrouted),
            ("augmentations", plan.augmentations),
        ],
    )

    route_rows = []
    with stage("routes"):
        for node in sorted(network.exporters, key=lambda n: n.country):
            alloc = allocate_routes(node.country, plan)
            for k, r in enumerate(alloc.routes, start=1):
                route_rows.append((node.country, k, " > ".join(r.path), r.difficulty, r.priority, r.fraction, r.persons, r.flow))
    bundle.files["routes.csv"] = to_csv(
        ["source", "route", "path", "difficulty", "priority", "fraction", "persons", "flow"], route_rows
    )

    if config.scenario:
        with stage("events"):
            raw = _input_bytes(config.scenario, "scenario")
            digests["scenario"] = hashlib.sha256(raw).hexdigest()
            events = load_scenario(io.BytesIO(raw))
            stages = run_timeline(network, events, baseline=plan)
        bundle.files["events.csv"] = to_csv(
            ["stage", "event", "kinds", "total_flow", "total_cost", "delta_cost"],
            [
                (i, s.event, "+".join(sorted(ev.kinds)), s.plan.total_flow, float(s.plan.total_cost), float(s.delta_cost))
                for i, (ev, s) in enumerate(zip(events, stages), start=1)
            ],
        )
        bundle.files["event_diffs.csv"] = to_csv(
            ["stage", "event", "from", "to", "flow_before", "flow_after"],
            [(i, s.event, u, v, a, b) for i, s in enumerate(stages, start=1) for u, v, a, b in s.changed_arcs],
        )
        bundle.stages = stages

    if config.dynamics:
        with stage("dynamics"):
            raw = _input_bytes(config.dynamics, "dynamics")
            digests["dynamics"] = hashlib.sha256(raw).hexdigest()
            spec = yaml.safe_load(raw) or {}
            bundle.files.update(run_dynamics(spec, config.seed))

    bundle.manifest = build_manifest(config, digests, bundle.files)
    if config.out:
        bundle.write(config.out)
    return bundle


def build_manifest(config: PipelineConfig, digests: dict, files: dict) -> dict:
    from migrana import __version__

    resolved = config.resolved()
    digest = hashlib.sha256(
        json.dumps({"config": resolved, "inputs": digests}, sort_keys=True).encode()
    ).hexdigest()
    return {
        "tool": "migrana",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": resolved,
        "inputs": digests,
        "input_digest": digest,
        "outputs": {name: hashlib.sha256(text.encode()).hexdigest() for name, text in sorted(files.items())},
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
