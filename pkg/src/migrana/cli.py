"""Command-line driver.

Errors print one line ``migrana: error[<stage>] <module>: <message>`` to
stderr and exit 1 (bad input) or 2 (solver failure).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import traceback
from pathlib import Path

import numpy as np
import yaml

from migrana.assignment import load_cost_matrix, solve_assignment
from migrana.errors import InputError, MigranaError
from migrana.flow import solve_min_cost_flow
from migrana.pipeline import (
    PipelineConfig,
    export_graph,
    load_config,
    prepare_network,
    run_dynamics,
    run_pipeline,
    stage,
    to_csv,
)
from migrana.regression import DesignMatrix, diagnostics, ols_fit, stepwise_select

log = logging.getLogger("migrana")

# flag dest -> config field; flags win over the config file
OVERRIDES = ("data", "topology", "scores", "supplies", "preset", "presets_file", "threshold",
             "enter_p", "exit_p", "scenario", "dynamics", "out", "seed")


def _network_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML or JSON config file")
    p.add_argument("--data", help="country factor table (CSV/TSV); 'bundled' for the bundled one")
    p.add_argument("--topology", help="edge list (YAML or CSV)")
    p.add_argument("--scores", help="score table CSV, 'bundled', or 'preset' to compute from --preset")
    p.add_argument("--supplies", help="supply overrides CSV, 'bundled' or 'none'")
    p.add_argument("--preset", help="coefficient preset name")
    p.add_argument("--presets-file", dest="presets_file", help="YAML file of extra presets")
    p.add_argument("--threshold", type=float, help="role classification threshold")
    p.add_argument("--enter-p", dest="enter_p", type=float)
    p.add_argument("--exit-p", dest="exit_p", type=float)
    p.add_argument("--scenario", help="event timeline YAML")
    p.add_argument("--dynamics", help="dynamics YAML evaluated alongside the solve")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="migrana", description="Refugee flow modelling toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="score, build the network, solve and write the report bundle")
    _network_flags(p)
    p.add_argument("--out", help="output directory (default: migrana-out)")

    p = sub.add_parser("events", help="fold a scenario timeline over the solved network")
    _network_flags(p)
    p.add_argument("--out", help="output directory (default: migrana-out)")

    p = sub.add_parser("export", help="print the solved plan as a DOT graph")
    _network_flags(p)
    p.add_argument("--out", help="write the DOT text here instead of stdout")

    p = sub.add_parser("fit", help="OLS or stepwise regression on a CSV")
    p.add_argument("--data", required=True, help="CSV with a header row")
    p.add_argument("--response", required=True, help="response column")
    p.add_argument("--predictors", help="comma-separated predictor columns (default: all other numeric)")
    p.add_argument("--stepwise", action="store_true", help="select predictors by partial F-tests")
    p.add_argument("--enter-p", dest="enter_p", type=float, default=0.05)
    p.add_argument("--exit-p", dest="exit_p", type=float, default=0.10)
    p.add_argument("--out", help="write coefficients CSV here instead of stdout")

    p = sub.add_parser("dynamics", help="control fits, reallocation shares and Markov evolution")
    p.add_argument("--config", required=True, help="dynamics YAML")
    p.add_argument("--steps", type=int, help="override the number of evolution steps")
    p.add_argument("--tol", type=float, help="steady-state tolerance")
    p.add_argument("--seed", type=int, default=0, help="seed for the random starting states")
    p.add_argument("--out", help="output directory; prints the trajectory when omitted")

    p = sub.add_parser("assign", help="Hungarian assignment on a labelled cost matrix")
    p.add_argument("matrix", help="CSV: header of column labels, first column row labels")
    p.add_argument("--objective", choices=("min", "max"), default="min")
    p.add_argument("--out", help="write the pairing CSV here instead of stdout")
    return parser


def _config_from(args) -> PipelineConfig:
    config = load_config(args.config) if args.config else PipelineConfig()
    for key in OVERRIDES:
        value = getattr(args, key, None)
        if value is not None:
            setattr(config, key, value)
    if config.out is None and args.command != "export":
        config.out = "migrana-out"
    return config


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    config = _config_from(args)
    if args.command == "events" and not config.scenario:
        raise InputError("events needs --scenario (or 'scenario' in the config)")
    bundle = run_pipeline(config)
    plan = bundle.plan
    print(f"total_flow={plan.total_flow} total_cost={plan.total_cost:.6g} unrouted={plan.unrouted}")
    for i, s in enumerate(bundle.stages, start=1):
        print(f"stage {i} {s.event}: total_cost={s.plan.total_cost:.6g} delta={s.delta_cost:+.6g} changed_arcs={len(s.changed_arcs)}")
    print(f"wrote {len(bundle.files) + 1} files to {config.out}")
    return 0


def cmd_export(args) -> int:
    config = _config_from(args)
    network, _, _ = prepare_network(config)
    with stage("solve"):
        plan = solve_min_cost_flow(network)
    _emit(export_graph(plan, network), args.out)
    return 0


def cmd_fit(args) -> int:
    with stage("load"):
        path = Path(args.data)
        if not path.exists():
            raise InputError(f"data file not found: {path}")
        lines = [ln for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
        delimiter = "\t" if lines and "\t" in lines[0] else ","
        rows = list(csv.DictReader(io.StringIO("\n".join(lines)), delimiter=delimiter))
        if not rows:
            raise InputError(f"{path}: no data rows")
        header = list(rows[0])
        if args.response not in header:
            raise InputError(f"response column {args.response!r} not in {path}")
        if args.predictors:
            predictors = [c.strip() for c in args.predictors.split(",")]
            missing = [c for c in predictors if c not in header]
            if missing:
                raise InputError(f"unknown predictor column(s): {', '.join(missing)}")
        else:
            predictors = [c for c in header if c != args.response and _numeric(rows, c)]

        def column(name):
            try:
                return [float(r[name].replace(",", "").rstrip("%")) for r in rows]
            except (ValueError, AttributeError):
                raise InputError(f"column {name!r} has a non-numeric entry") from None

        X = np.column_stack([column(c) for c in predictors])
        y = np.array(column(args.response))
    with stage("fit"):
        design = DesignMatrix.from_predictors(X, y, predictors)
        if args.stepwise:
            model = stepwise_select(design, args.enter_p, args.exit_p)
        else:
            model = ols_fit(design)
        diag = diagnostics(model, design)
    terms = ["intercept"] + [predictors[j] for j in model.included]
    text = to_csv(
        ["term", "coefficient", "t", "p"],
        [(t, float(c), float(ts), float(tp)) for t, c, ts, tp in zip(terms, model.coefficients, diag.t_statistics, diag.t_pvalues)],
    )
    _emit(text, args.out)
    print(
        f"F={diag.f_statistic:.6g} p={diag.f_pvalue:.6g} R2={diag.r_squared:.6g} "
        f"adjR2={diag.adjusted_r_squared:.6g} df=({diag.df_model}, {diag.df_resid})",
        file=sys.stderr if not args.out else sys.stdout,
    )
    return 0


def _numeric(rows, name) -> bool:
    try:
        for r in rows:
            float(r[name].replace(",", "").rstrip("%"))
    except (ValueError, AttributeError):
        return False
    return True


def cmd_dynamics(args) -> int:
    with stage("load"):
        path = Path(args.config)
        if not path.exists():
            raise InputError(f"dynamics file not found: {path}")
        spec = yaml.safe_load(path.read_text()) or {}
        if not isinstance(spec, dict):
            raise InputError(f"{path}: expected a mapping")
        if args.steps is not None:
            spec["steps"] = args.steps
        if args.tol is not None:
            spec["tol"] = args.tol
    with stage("dynamics"):
        files = run_dynamics(spec, args.seed)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text, encoding="utf-8", newline="")
        print(f"wrote {len(files)} files to {out}")
    else:
        for name, text in files.items():
            sys.stdout.write(f"# {name}\n{text}")
    return 0


def cmd_assign(args) -> int:
    with stage("load"):
        if not os.path.exists(args.matrix):
            raise InputError(f"matrix file not found: {args.matrix}")
        matrix = load_cost_matrix(args.matrix)
    with stage("assign"):
        result = solve_assignment(matrix, args.objective)
    values = matrix.values
    rows = [
        (r, c, float(values[matrix.row_labels.index(r), matrix.col_labels.index(c)]))
        for r, c in result.pairs.items()
    ]
    text = to_csv(["row", "column", "value"], rows)
    _emit(text, args.out)
    print(f"{args.objective} total={result.total:.6g}" + (f" unassigned={','.join(result.unassigned)}" if result.unassigned else ""),
          file=sys.stderr if not args.out else sys.stdout)
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "events": cmd_solve,
    "export": cmd_export,
    "fit": cmd_fit,
    "dynamics": cmd_dynamics,
    "assign": cmd_assign,
}


def _origin(exc: BaseException) -> str:
    """Package module in which the error was raised."""
    module = "cli"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        name = frame.f_globals.get("__name__", "")
        if name.startswith("migrana."):
            module = name.split(".", 1)[1]
    return module


def main(argv=None) -> int:
    level = logging.getLevelName(os.environ.get("MIGRANA_LOG", "WARNING").upper())
    level = level if isinstance(level, int) else logging.WARNING
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    log.setLevel(level)
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except MigranaError as exc:
        message = " ".join(str(exc).split())
        print(f"migrana: error[{exc.stage}] {_origin(exc)}: {message}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"migrana: error[io] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
