"""Command line front end.

Four subcommands cover the workflow: ``simulate`` writes a synthetic
sample, ``estimate`` fits effect estimates on a CSV, ``sweep`` evaluates
a sensitivity solver over a parameter grid, and ``bootstrap`` runs the
resampling inference on its own.

Every run can start from ``--config FILE`` (a plain JSON options object
or a previously written manifest); explicit flags override the file.
Each artifact-producing run writes a manifest alongside its output with
the fully resolved options, so feeding the manifest back through
``--config`` reproduces the run byte for byte. Manifests carry no
timestamps and no worker counts; parallelism never changes results.

Exit codes: 0 success, 2 usage or configuration, 3 data loading,
4 outcome-model fitting, 5 identification, 6 inference, 7 any other
library error. Failures print a single JSON object on stderr with the
error class, exit code, and message.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from . import __version__
from .dataio import ColumnSchema, load_csv, write_dataset_csv, write_json_document, write_sweep_csv
from .errors import (
    BidivError,
    DataError,
    IdentificationError,
    InferenceError,
    ProbitError,
)
from .identify import NAIVE_OUTPUT_ALIAS, estimate_iv, estimate_naive
from .inference import bootstrap, delta_method_se, stacked_baseline_map
from .model import Dataset, IVScenario, StructuralParams, simulate
from .numerics import RngStream
from .probit import fit_probit
from .sensitivity import (
    RELATIVE_TO_IV,
    SIGNAL_TO_NOISE,
    SOLVER_NAMES,
    SensitivityParams,
    SweepPlan,
    sweep,
)

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_FIT = 4
EXIT_IDENTIFY = 5
EXIT_INFERENCE = 6
EXIT_LIBRARY = 7

#: Default generative setup: moderate feedback in both directions, equal
#: instrument strengths, independent confounders, one weak covariate.
STRUCTURAL_DEFAULTS = {
    "beta_xy": -0.25,
    "beta_yx": 0.45,
    "mu_xz": 0.65,
    "mu_yw": 0.65,
    "sigma": 0.75,
    "gamma1": 1.0,
    "gamma2": 0.0,
    "eta": 0.0,
    "delta": 0.0,
    "mu_x0": 0.0,
    "mu_y0": 0.0,
    "mu_xq": 0.15,
    "mu_yq": 0.15,
}

SCHEMA_KEYS = (
    "x_column",
    "y_column",
    "z_column",
    "w_column",
    "covariate_columns",
    "standardize_columns",
    "binary_recodings",
)


# ---------------------------------------------------------------------------
# configuration plumbing


def _load_config(path: Optional[str], command: str) -> Dict[str, object]:
    """Read a config file; accepts a bare options object or a manifest."""
    if path is None:
        return {}
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ValueError(f"config {path} must be a JSON object")
    if "options" in doc and isinstance(doc["options"], dict):
        written_by = doc.get("command")
        if written_by is not None and written_by != command:
            raise ValueError(
                f"config {path} was written by the {written_by!r} command, "
                f"not {command!r}"
            )
        return dict(doc["options"])
    return doc


def _merge(args: argparse.Namespace, config: Mapping[str, object], defaults: Mapping[str, object]) -> Dict[str, object]:
    """Resolve options: explicit flag beats config beats built-in default."""
    opts: Dict[str, object] = {}
    for key, fallback in defaults.items():
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            opts[key] = cli_value
        elif key in config:
            opts[key] = config[key]
        else:
            opts[key] = fallback
    unknown = set(config) - set(defaults)
    if unknown:
        raise ValueError(f"config keys not understood by this command: {sorted(unknown)}")
    return opts


def _split_csv_list(value) -> Tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, str):
        return tuple(part.strip() for part in value.split(",") if part.strip())
    return tuple(str(v) for v in value)


def _parse_recode_flag(spec: str) -> Tuple[str, Dict[str, int]]:
    """Parse 'column=literal:value,literal:value' into a recoding table."""
    column, sep, table_part = spec.partition("=")
    if not sep or not column.strip() or not table_part:
        raise ValueError(f"bad --recode value {spec!r}; expected COL=LIT:0,LIT:1")
    table: Dict[str, int] = {}
    for pair in table_part.split(","):
        literal, sep2, value = pair.rpartition(":")
        if not sep2:
            raise ValueError(f"bad --recode entry {pair!r}; expected LIT:VALUE")
        table[literal.strip()] = int(value)
    return column.strip(), table


def _resolve_schema(args: argparse.Namespace, config: Mapping[str, object]) -> Tuple[ColumnSchema, Dict[str, object]]:
    """Build the column schema from flags and config; returns it together
    with the normalized option values for the manifest."""
    opts: Dict[str, object] = {}
    for key, flag, default in (
        ("x_column", "x_column", "x"),
        ("y_column", "y_column", "y"),
        ("z_column", "z_column", "z"),
        ("w_column", "w_column", "w"),
    ):
        cli_value = getattr(args, flag, None)
        opts[key] = cli_value if cli_value is not None else config.get(key, default)

    cli_cov = getattr(args, "covariates", None)
    if cli_cov is not None:
        opts["covariate_columns"] = list(_split_csv_list(cli_cov))
    else:
        opts["covariate_columns"] = list(_split_csv_list(config.get("covariate_columns")))

    cli_std = getattr(args, "standardize", None)
    if cli_std is not None:
        opts["standardize_columns"] = list(_split_csv_list(cli_std))
    else:
        opts["standardize_columns"] = list(_split_csv_list(config.get("standardize_columns")))

    cli_recode = getattr(args, "recode", None)
    if cli_recode:
        recodings: Dict[str, Dict[str, int]] = {}
        for spec in cli_recode:
            column, table = _parse_recode_flag(spec)
            recodings.setdefault(column, {}).update(table)
        opts["binary_recodings"] = recodings
    else:
        raw = config.get("binary_recodings", {})
        opts["binary_recodings"] = {
            str(col): {str(lit): int(v) for lit, v in dict(table).items()}
            for col, table in dict(raw).items()
        }

    schema = ColumnSchema(
        x_column=str(opts["x_column"]),
        y_column=str(opts["y_column"]),
        z_column=str(opts["z_column"]),
        w_column=str(opts["w_column"]),
        covariate_columns=tuple(opts["covariate_columns"]),
        binary_recodings=opts["binary_recodings"],
        standardize_columns=tuple(opts["standardize_columns"]),
    )
    return schema, opts


def _parse_grid_flag(spec: str) -> Tuple[str, List[float]]:
    """Parse 'axis=lo:hi:step' (inclusive) or 'axis=v1,v2,...'."""
    name, sep, rest = spec.partition("=")
    name = name.strip()
    if not sep or not name or not rest:
        raise ValueError(f"bad --grid value {spec!r}; expected AXIS=LO:HI:STEP or AXIS=V1,V2,...")
    if ":" in rest:
        parts = rest.split(":")
        if len(parts) != 3:
            raise ValueError(f"bad --grid range {rest!r}; expected LO:HI:STEP")
        lo, hi, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError(f"--grid step must be positive, got {step}")
        if hi < lo:
            raise ValueError(f"--grid range has hi < lo: {rest!r}")
        count = int(round((hi - lo) / step)) + 1
        values = [lo + i * step for i in range(count)]
        if values and values[-1] > hi + 1e-9 * max(1.0, abs(step)):
            values.pop()
        return name, values
    return name, [float(p) for p in rest.split(",") if p.strip()]


def _resolve_grid(args: argparse.Namespace, config: Mapping[str, object]) -> List[Tuple[str, List[float]]]:
    cli_grid = getattr(args, "grid", None)
    if cli_grid:
        axes = [_parse_grid_flag(spec) for spec in cli_grid]
    else:
        raw = config.get("grid")
        if raw is None:
            raise ValueError("sweep needs at least one --grid AXIS=LO:HI:STEP (or a grid in the config)")
        if isinstance(raw, dict):
            axes = [(str(k), [float(v) for v in vals]) for k, vals in raw.items()]
        else:
            axes = [(str(name), [float(v) for v in vals]) for name, vals in raw]
    seen = set()
    for name, _ in axes:
        if name in seen:
            raise ValueError(f"duplicate sweep axis {name!r}")
        seen.add(name)
    return axes


def _out_paths(args: argparse.Namespace, default_name: str) -> Tuple[Path, str]:
    out_dir = Path(args.out if args.out is not None else ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    name = args.name if args.name is not None else default_name
    return out_dir, name


def _structural_from(opts: Mapping[str, object]) -> StructuralParams:
    return StructuralParams(**{key: float(opts[key]) for key in STRUCTURAL_DEFAULTS})


# ---------------------------------------------------------------------------
# subcommand bodies


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_config(args.config, "simulate")
    defaults: Dict[str, object] = {
        "n": 10_000,
        "scenario": "gaussian",
        "seed": 0,
        "covariate": True,
        **STRUCTURAL_DEFAULTS,
    }
    opts = _merge(args, config, defaults)
    opts["n"] = int(opts["n"])
    opts["seed"] = int(opts["seed"])

    params = _structural_from(opts)
    scenario = IVScenario.from_name(str(opts["scenario"]))
    rng = RngStream(opts["seed"])
    d = simulate(params, scenario, opts["n"], rng, include_q=bool(opts["covariate"]))

    out_dir, name = _out_paths(args, "simulated")
    data_path = out_dir / f"{name}.csv"
    write_dataset_csv(d, data_path)
    write_json_document(
        {"command": "simulate", "version": __version__, "options": opts},
        out_dir / f"{name}.manifest.json",
    )
    print(f"wrote {d.n} rows to {data_path} (seed {opts['seed']})")
    return EXIT_OK


def _print_estimate_row(label: str, block: Mapping[str, object]) -> None:
    def _fmt(point, se):
        text = f"{point:+.4f}"
        if se is not None:
            text += f" (se {se:.4f})"
        return text

    print(f"  {label:<10s} beta_xy {_fmt(block['beta_xy'], block.get('se_xy')):<24s} "
          f"beta_yx {_fmt(block['beta_yx'], block.get('se_yx'))}")
    for key in ("ci_xy", "ci_yx"):
        ci = block.get(key)
        if ci is not None:
            print(f"  {'':<10s} {key} [{ci[0]:+.4f}, {ci[1]:+.4f}]")


def _cmd_estimate(args: argparse.Namespace) -> int:
    config = _load_config(args.config, "estimate")
    defaults: Dict[str, object] = {
        "input": None,
        "method": "both",
        "bootstrap": 0,
        "delta": False,
        "level": 0.95,
        "seed": 0,
        "covariate": True,
    }
    opts = _merge(args, {k: v for k, v in config.items() if k not in SCHEMA_KEYS}, defaults)
    schema, schema_opts = _resolve_schema(args, config)
    opts.update(schema_opts)
    if opts["input"] is None:
        raise ValueError("estimate needs --input FILE")
    opts["bootstrap"] = int(opts["bootstrap"])
    opts["seed"] = int(opts["seed"])
    opts["level"] = float(opts["level"])

    d = load_csv(str(opts["input"]), schema)
    include_q = bool(opts["covariate"])
    method = str(opts["method"])
    if method not in ("iv", "naive", "both"):
        raise ValueError(f"unknown method {method!r}; expected iv, naive, or both")
    wanted: List[Tuple[str, object, int]] = []
    if method in ("iv", "both"):
        wanted.append(("iv", lambda data: estimate_iv(data, include_q=include_q), 0))
    if method in ("naive", "both"):
        wanted.append((NAIVE_OUTPUT_ALIAS, estimate_naive, 1))

    rng = RngStream(opts["seed"])
    results: Dict[str, Dict[str, object]] = {}
    for label, estimator, stream in wanted:
        est = estimator(d)
        block: Dict[str, object] = {
            "beta_xy": est.beta_xy,
            "beta_yx": est.beta_yx,
            "diagnostics": est.diagnostics,
        }
        if label == "iv" and bool(opts["delta"]):
            design = d.design_matrix() if include_q else d.design_matrix()[:, :3]
            fit_x = fit_probit(d.x, design)
            fit_y = fit_probit(d.y, design)
            se_xy, se_yx = delta_method_se(
                fit_x, fit_y, stacked_baseline_map(design.shape[1])
            )
            block["se_xy"] = se_xy
            block["se_yx"] = se_yx
            block["se_method"] = "delta"
        if opts["bootstrap"] > 0:
            boot = bootstrap(
                d,
                estimator,
                opts["bootstrap"],
                level=opts["level"],
                rng=rng.derive(stream),
            )
            block["bootstrap"] = {
                "replicates": boot.replicates,
                "successes": boot.successes,
                "sd_xy": boot.sd_xy,
                "sd_yx": boot.sd_yx,
                "failure_reasons": boot.failure_reasons,
            }
            block["ci_xy"] = list(boot.ci_xy)
            block["ci_yx"] = list(boot.ci_yx)
            block["level"] = boot.level
            if "se_xy" not in block:
                block["se_xy"] = boot.sd_xy
                block["se_yx"] = boot.sd_yx
                block["se_method"] = "bootstrap"
        results[label] = block

    out_dir, name = _out_paths(args, "estimate")
    report = {
        "command": "estimate",
        "version": __version__,
        "options": opts,
        "data": {
            "input": str(opts["input"]),
            "n": d.n,
            "provenance": d.provenance,
        },
        "results": results,
    }
    report_path = out_dir / f"{name}.report.json"
    write_json_document(report, report_path)

    print(f"estimates on {opts['input']} (n={d.n}):")
    for label, _, _ in wanted:
        _print_estimate_row(label, results[label])
    print(f"wrote {report_path}")
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _load_config(args.config, "sweep")
    defaults: Dict[str, object] = {
        "input": None,
        "solver": "baseline",
        "replicates": None,
        "n": 10_000,
        "scenario": "gaussian",
        "seed": 0,
        "covariate": True,
        "gamma1": 1.0,
        "gamma2": 0.0,
        "eta0": 0.0,
        "delta0": 0.0,
        "eta_delta_mode": RELATIVE_TO_IV,
        "branch": "lt1",
        "level": None,
        **{k: v for k, v in STRUCTURAL_DEFAULTS.items() if k not in ("gamma1", "gamma2", "eta", "delta")},
    }
    config_known = {k: v for k, v in config.items() if k not in SCHEMA_KEYS and k != "grid"}
    opts = _merge(args, config_known, defaults)
    axes = _resolve_grid(args, config)
    opts["grid"] = [[name, values] for name, values in axes]
    opts["n"] = int(opts["n"])
    opts["seed"] = int(opts["seed"])

    base = SensitivityParams(
        gamma1=float(opts["gamma1"]),
        gamma2=float(opts["gamma2"]),
        eta0=float(opts["eta0"]),
        delta0=float(opts["delta0"]),
        eta_delta_mode=str(opts["eta_delta_mode"]),
    )
    plan = SweepPlan.over(base, **{name: values for name, values in axes})
    solver = str(opts["solver"])
    if solver not in SOLVER_NAMES:
        raise ValueError(f"unknown solver {solver!r}; expected one of {SOLVER_NAMES}")

    if opts["input"] is not None:
        schema, schema_opts = _resolve_schema(args, config)
        opts.update(schema_opts)
        for key in STRUCTURAL_DEFAULTS:
            if key in ("gamma1", "gamma2", "eta", "delta"):
                continue
            opts.pop(key, None)
        source: object = load_csv(str(opts["input"]), schema)
        replicates = int(opts["replicates"]) if opts["replicates"] is not None else 200
    else:
        structural = dict(STRUCTURAL_DEFAULTS)
        for key in structural:
            if key in opts and key not in ("gamma1", "gamma2", "eta", "delta"):
                structural[key] = float(opts[key])
        source = StructuralParams(**structural)
        replicates = int(opts["replicates"]) if opts["replicates"] is not None else 200
    opts["replicates"] = replicates

    table = sweep(
        source,
        plan,
        solver,
        replicates=replicates,
        rng=RngStream(opts["seed"]),
        n=opts["n"],
        scenario=IVScenario.from_name(str(opts["scenario"])),
        include_q=bool(opts["covariate"]),
        branch=str(opts["branch"]),
        level=None if opts["level"] is None else float(opts["level"]),
        workers=args.workers,
    )

    out_dir, name = _out_paths(args, "sweep")
    csv_path = out_dir / f"{name}.sweep.csv"
    write_sweep_csv(table, csv_path)
    write_json_document(
        {"command": "sweep", "version": __version__, "options": opts},
        out_dir / f"{name}.manifest.json",
    )
    failures = sum(row.failures for row in table.rows)
    unresolved = sum(row.unresolved for row in table.rows)
    print(
        f"swept {solver} over {plan.cell_count()} cells "
        f"({table.source_kind} source, {replicates} replicates each)"
    )
    print(f"failed replicates: {failures}, proximity-resolved ties: {unresolved}")
    print(f"wrote {csv_path}")
    return EXIT_OK


def _cmd_bootstrap(args: argparse.Namespace) -> int:
    config = _load_config(args.config, "bootstrap")
    defaults: Dict[str, object] = {
        "input": None,
        "method": "iv",
        "bootstrap": 200,
        "level": 0.95,
        "seed": 0,
        "covariate": True,
    }
    opts = _merge(args, {k: v for k, v in config.items() if k not in SCHEMA_KEYS}, defaults)
    schema, schema_opts = _resolve_schema(args, config)
    opts.update(schema_opts)
    if opts["input"] is None:
        raise ValueError("bootstrap needs --input FILE")
    opts["bootstrap"] = int(opts["bootstrap"])
    opts["seed"] = int(opts["seed"])
    opts["level"] = float(opts["level"])

    d = load_csv(str(opts["input"]), schema)
    include_q = bool(opts["covariate"])
    method = str(opts["method"])
    if method == "iv":
        estimator = lambda data: estimate_iv(data, include_q=include_q)
        label = "iv"
    elif method == "naive":
        estimator = estimate_naive
        label = NAIVE_OUTPUT_ALIAS
    else:
        raise ValueError(f"unknown method {method!r}; expected iv or naive")

    point = estimator(d)
    boot = bootstrap(
        d, estimator, opts["bootstrap"], level=opts["level"], rng=RngStream(opts["seed"])
    )

    out_dir, name = _out_paths(args, "bootstrap")
    doc = {
        "command": "bootstrap",
        "version": __version__,
        "options": opts,
        "data": {"input": str(opts["input"]), "n": d.n, "provenance": d.provenance},
        "results": {
            label: {
                "beta_xy": point.beta_xy,
                "beta_yx": point.beta_yx,
                "sd_xy": boot.sd_xy,
                "sd_yx": boot.sd_yx,
                "ci_xy": list(boot.ci_xy),
                "ci_yx": list(boot.ci_yx),
                "level": boot.level,
                "replicates": boot.replicates,
                "successes": boot.successes,
                "failure_reasons": boot.failure_reasons,
            }
        },
    }
    doc_path = out_dir / f"{name}.bootstrap.json"
    write_json_document(doc, doc_path)

    print(f"bootstrap ({label}) on {opts['input']}: "
          f"{boot.successes}/{boot.replicates} replicates succeeded")
    _print_estimate_row(label, {
        "beta_xy": point.beta_xy,
        "beta_yx": point.beta_yx,
        "se_xy": boot.sd_xy,
        "se_yx": boot.sd_yx,
        "ci_xy": list(boot.ci_xy),
        "ci_yx": list(boot.ci_yx),
    })
    print(f"wrote {doc_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser assembly


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", metavar="FILE", help="JSON options or a manifest from a previous run")
    sp.add_argument("--out", metavar="DIR", help="output directory (default: current)")
    sp.add_argument("--name", metavar="BASE", help="basename for output files")
    sp.add_argument("--seed", type=int, help="root random seed (default 0)")


def _add_structural(sp: argparse.ArgumentParser, exclude: Tuple[str, ...] = ()) -> None:
    group = sp.add_argument_group("generative parameters")
    for key in STRUCTURAL_DEFAULTS:
        if key in exclude:
            continue
        flag = "--" + key.replace("_", "-")
        group.add_argument(flag, type=float, help=f"{key} (default {STRUCTURAL_DEFAULTS[key]})")


def _add_schema(sp: argparse.ArgumentParser) -> None:
    group = sp.add_argument_group("input columns")
    group.add_argument("--x-column", help="column holding the first binary outcome (default x)")
    group.add_argument("--y-column", help="column holding the second binary outcome (default y)")
    group.add_argument("--z-column", help="column holding the instrument for the first outcome (default z)")
    group.add_argument("--w-column", help="column holding the instrument for the second outcome (default w)")
    group.add_argument("--covariates", metavar="COLS", help="comma-separated covariate columns")
    group.add_argument("--standardize", metavar="COLS", help="comma-separated columns to z-score")
    group.add_argument(
        "--recode",
        action="append",
        metavar="COL=LIT:0,LIT:1",
        help="map string literals of a column to 0/1 (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bidiv",
        description="Bidirectional effect estimation for binary outcome pairs "
        "with instrument-based identification and sensitivity analysis.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", help="write a synthetic sample as CSV")
    _add_common(sim)
    sim.add_argument("--n", type=int, help="sample size (default 10000)")
    sim.add_argument("--scenario", choices=("gaussian", "uniform"), help="instrument distribution")
    sim.add_argument(
        "--covariate",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="include the observed covariate column (default yes)",
    )
    _add_structural(sim)
    sim.set_defaults(func=_cmd_simulate)

    est = commands.add_parser("estimate", help="estimate both effects from a CSV")
    _add_common(est)
    est.add_argument("--input", metavar="FILE", help="CSV file with the sample")
    est.add_argument("--method", choices=("iv", "naive", "both"), help="which estimators to run (default both)")
    est.add_argument("--bootstrap", type=int, metavar="B", help="bootstrap replicates for sd and CI (default 0 = off)")
    est.add_argument(
        "--delta",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="analytic standard errors for the instrument-based estimator",
    )
    est.add_argument("--level", type=float, help="confidence level (default 0.95)")
    est.add_argument(
        "--covariate",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="use covariate columns in the fits (default yes)",
    )
    _add_schema(est)
    est.set_defaults(func=_cmd_estimate)

    sw = commands.add_parser("sweep", help="evaluate a solver over a sensitivity grid")
    _add_common(sw)
    sw.add_argument("--input", metavar="FILE", help="CSV sample; omit to sweep over simulated data")
    sw.add_argument("--solver", choices=SOLVER_NAMES, help="which solver to evaluate (default baseline)")
    sw.add_argument(
        "--grid",
        action="append",
        metavar="AXIS=LO:HI:STEP",
        help="sweep axis, inclusive range or comma list (repeatable; axes: gamma1, gamma2, eta0, delta0)",
    )
    sw.add_argument("--replicates", type=int, help="datasets per cell (simulation) or bootstrap resamples (dataset); default 200")
    sw.add_argument("--n", type=int, help="simulated sample size per replicate (default 10000)")
    sw.add_argument("--scenario", choices=("gaussian", "uniform"), help="instrument distribution for simulation sweeps")
    sw.add_argument("--gamma1", type=float, help="base confounder variance ratio (default 1)")
    sw.add_argument("--gamma2", type=float, help="base confounder covariance ratio (default 0)")
    sw.add_argument("--eta0", type=float, help="base direct-instrument leak of Z (default 0)")
    sw.add_argument("--delta0", type=float, help="base direct-instrument leak of W (default 0)")
    sw.add_argument(
        "--eta-delta-mode",
        choices=(RELATIVE_TO_IV, SIGNAL_TO_NOISE),
        help="how eta0/delta0 scale into the structural leaks",
    )
    sw.add_argument("--branch", choices=("lt1", "gt1"), help="feedback-product branch for the shared solver")
    sw.add_argument("--level", type=float, help="CI level for dataset sweeps (default: no CI)")
    sw.add_argument("--workers", type=int, help="thread count (results never depend on it; not recorded)")
    sw.add_argument(
        "--covariate",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="include covariates in fits (default yes)",
    )
    _add_schema(sw)
    _add_structural(sw, exclude=("gamma1", "gamma2", "eta", "delta"))
    sw.set_defaults(func=_cmd_sweep)

    bs = commands.add_parser("bootstrap", help="resampling inference for one estimator")
    _add_common(bs)
    bs.add_argument("--input", metavar="FILE", help="CSV file with the sample")
    bs.add_argument("--method", choices=("iv", "naive"), help="estimator to bootstrap (default iv)")
    bs.add_argument("--bootstrap", type=int, metavar="B", help="replicate count (default 200)")
    bs.add_argument("--level", type=float, help="confidence level (default 0.95)")
    bs.add_argument(
        "--covariate",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="use covariate columns in the fits (default yes)",
    )
    _add_schema(bs)
    bs.set_defaults(func=_cmd_bootstrap)

    return parser


def _fail(exc: BaseException, code: int) -> int:
    doc = {"error": type(exc).__name__, "exit_code": code, "message": str(exc)}
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if not exc.code else int(exc.code)
    try:
        return args.func(args)
    except DataError as exc:
        return _fail(exc, EXIT_DATA)
    except ProbitError as exc:
        return _fail(exc, EXIT_FIT)
    except IdentificationError as exc:
        return _fail(exc, EXIT_IDENTIFY)
    except InferenceError as exc:
        return _fail(exc, EXIT_INFERENCE)
    except BidivError as exc:
        return _fail(exc, EXIT_LIBRARY)
    except (ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        return _fail(exc, EXIT_USAGE)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
