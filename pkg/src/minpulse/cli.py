"""Command-line front end: orchestration, fitting and CSV/JSON emission.

Every subcommand writes one primary output table (CSV by default, JSON
with ``--format json``) and a JSON run manifest next to it carrying the
resolved configuration, library versions and solver convergence flags.
Floats are written with 17 significant digits so that a rerun with the
same configuration reproduces the output byte for byte.

Times and angles are dimensionless throughout; only the ``nmr``
subcommand converts to physical units.  ``MINPULSE_WORKERS`` bounds the
thread count of multistart scans (default: available parallelism).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__, analytic, grape, shooting
from ._backend import BACKEND
from .errors import InsufficientDataError, MinpulseError

__all__ = [
    "ConvergenceFit",
    "fit_convergence",
    "run",
    "main",
]

_FIT_MODELS = ("exponential", "polynomial")


@dataclass(frozen=True)
class ConvergenceFit:
    """Least-squares fit of a minimum-time convergence law.

    ``exponential`` fits log(t_f - t_f_continuous) against N,
    ``polynomial`` against log N.  Only converged rows with a positive
    gap enter the fit.
    """

    model: str
    intercept: float
    slope: float
    r_squared: float
    rows_used: int


def fit_convergence(rows, t_f_continuous: float, model: str) -> ConvergenceFit:
    """Fit a convergence law to sweep rows.

    Parameters
    ----------
    rows : iterable
        Objects with ``n``, ``t_f`` and ``converged`` attributes, or
        ``(n, t_f[, converged])`` tuples.
    t_f_continuous : float
        Continuous-limit minimum time subtracted before taking logs.
    model : str
        ``"exponential"`` or ``"polynomial"``.

    Raises
    ------
    InsufficientDataError
        Fewer than five usable rows.
    """
    if model not in _FIT_MODELS:
        raise ValueError(f"model must be one of {_FIT_MODELS}, got {model!r}")
    points = []
    for row in rows:
        if hasattr(row, "t_f"):
            n, t_f, converged = row.n, row.t_f, row.converged
        else:
            row = tuple(row)
            n, t_f = row[0], row[1]
            converged = row[2] if len(row) > 2 else True
        if converged and t_f > t_f_continuous:
            points.append((float(n), float(t_f)))
    if len(points) < 5:
        raise InsufficientDataError(
            f"need >= 5 converged rows above the continuous time, "
            f"got {len(points)}")
    ns = np.array([p[0] for p in points])
    gaps = np.log(np.array([p[1] for p in points]) - t_f_continuous)
    x = ns if model == "exponential" else np.log(ns)
    slope, intercept = np.polyfit(x, gaps, 1)
    predicted = intercept + slope * x
    ss_res = float(np.sum((gaps - predicted) ** 2))
    ss_tot = float(np.sum((gaps - np.mean(gaps)) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return ConvergenceFit(model, float(intercept), float(slope),
                          float(r_squared), len(points))


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------

class ConfigError(Exception):
    """Invalid command line or configuration file."""


_COMMON_DEFAULTS = {"format": "csv", "seed": 42}

_DEFAULTS = {
    "two-control": {"n": 3, "mode": "locked", "period": None, "mirror": False},
    "one-control": {"delta": None, "bound": 1.0, "n": 20, "mode": "locked",
                    "period": None},
    "landau-zener": {"omega": None, "bound": 2.0, "n": 5, "mode": "locked",
                     "period": None},
    "linear": {"omega": None, "n": 4},
    "grape": {"n": 3, "t_start": 2.72, "t_stop": 2.77, "t_step": 0.001,
              "starts": 50, "method": "pmp", "seed": 7, "threshold": 1e-6},
    "sweep": {"family": None, "delta": None, "omega": None, "bound": None,
              "mirror": False, "n_start": 5, "n_stop": 50, "n_step": 1,
              "mode": "locked", "period": None, "fit": "both"},
    "adjoint-map": {"n": 3, "grid_size": 200},
    "nmr": {"nu": None, "digitization": 0.5, "n": 9, "mode": "free-tail"},
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minpulse",
        description="Time-optimal piecewise constant controls of two-level "
                    "systems: shooting, closed-form references and gradient "
                    "ascent.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p):
        p.add_argument("--output", type=Path, default=None,
                       help="primary output file (manifest written next to it)")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--config", type=Path, default=None,
                       help="JSON file supplying any of the other options")
        p.add_argument("--seed", type=int, default=None,
                       help="seed stream id for multistart randomness")

    def add_mode(p):
        p.add_argument("--n", type=int, default=None,
                       help="interval count (locked mode)")
        p.add_argument("--mode", choices=("locked", "free-tail"), default=None)
        p.add_argument("--period", type=float, default=None,
                       help="sampling period (free-tail mode)")

    p = sub.add_parser("two-control", help="resonant phase-control transfer")
    p.add_argument("--mirror", action="store_true", default=None)
    add_mode(p)
    add_common(p)

    p = sub.add_parser("one-control", help="bounded transverse amplitude at "
                                           "fixed detuning")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--bound", type=float, default=None)
    add_mode(p)
    add_common(p)

    p = sub.add_parser("landau-zener", help="bounded detuning sweep at fixed "
                                            "coupling")
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--bound", type=float, default=None)
    add_mode(p)
    add_common(p)

    p = sub.add_parser("linear", help="exactly solvable linearized system")
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    add_common(p)

    p = sub.add_parser("grape", help="fixed-time gradient ascent minimum-time "
                                     "scan")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--t-start", type=float, default=None)
    p.add_argument("--t-stop", type=float, default=None)
    p.add_argument("--t-step", type=float, default=None)
    p.add_argument("--starts", type=int, default=None)
    p.add_argument("--method", choices=grape.METHODS, default=None)
    p.add_argument("--threshold", type=float, default=None)
    add_common(p)

    p = sub.add_parser("sweep", help="minimum time against interval count")
    p.add_argument("--family",
                   choices=("two-control", "one-control", "landau-zener"),
                   default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--bound", type=float, default=None)
    p.add_argument("--mirror", action="store_true", default=None)
    p.add_argument("--n-start", type=int, default=None)
    p.add_argument("--n-stop", type=int, default=None)
    p.add_argument("--n-step", type=int, default=None)
    p.add_argument("--mode", choices=("locked", "free-tail"), default=None)
    p.add_argument("--period", type=float, default=None,
                   help="free-tail mode: row n uses sampling period "
                        "(this value)/n; defaults to the continuous time")
    p.add_argument("--fit", choices=_FIT_MODELS + ("both", "none"),
                   default=None)
    add_common(p)

    p = sub.add_parser("adjoint-map", help="distance to target over initial "
                                           "adjoints")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--grid-size", type=int, default=None)
    add_common(p)

    p = sub.add_parser("nmr", help="physical pulse times for a spin 1/2")
    p.add_argument("--nu", type=float, default=None,
                   help="maximum amplitude in Hz")
    p.add_argument("--digitization", type=float, default=None,
                   help="sampling period in microseconds")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--mode", choices=("locked", "free-tail"), default=None)
    add_common(p)
    return parser


def _load_config(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config {path}: invalid JSON at line {exc.lineno} "
            f"column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path}: expected a JSON object")
    return data


def _resolve(args: argparse.Namespace) -> dict:
    """Merge CLI values, config file values and defaults.

    Precedence: explicit command line > config file > built-in default.
    """
    sub = args.subcommand
    known = dict(_COMMON_DEFAULTS)
    known.update(_DEFAULTS[sub])
    known["output"] = None
    merged = dict(known)
    if args.config is not None:
        config = _load_config(args.config)
        config_sub = config.pop("subcommand", sub)
        if config_sub != sub:
            raise ConfigError(
                f"config subcommand {config_sub!r} does not match {sub!r}")
        for key, value in config.items():
            field = key.replace("-", "_")
            if field not in known:
                raise ConfigError(
                    f"config field {key!r} is not valid for {sub!r}")
            merged[field] = value
    for field in known:
        cli_value = getattr(args, field, None)
        if cli_value is not None:
            merged[field] = cli_value
    if merged["output"] is None:
        raise ConfigError("an output path is required (--output)")
    merged["output"] = Path(merged["output"])
    return merged


def _require(config: dict, *fields: str):
    for field in fields:
        if config.get(field) is None:
            raise ConfigError(f"--{field.replace('_', '-')} is required")


def _solve_mode(config: dict):
    if config["mode"] == "locked":
        _require(config, "n")
        if config["n"] < 1:
            raise ConfigError(f"--n must be >= 1, got {config['n']}")
        return shooting.LockedGrid(config["n"])
    _require(config, "period")
    if not config["period"] > 0.0:
        raise ConfigError(f"--period must be positive, got {config['period']}")
    return shooting.FreeTail(config["period"])


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _jsonable(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def _write_table(path: Path, fmt: str, columns: list[str], rows: list[tuple]):
    if fmt == "csv":
        lines = [",".join(columns)]
        lines += [",".join(_fmt(v) for v in row) for row in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        payload = {"columns": columns,
                   "rows": [_jsonable(list(row)) for row in rows]}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")


def _write_manifest(output: Path, subcommand: str, config: dict,
                    results: dict, flags: dict, extra_files=()):
    manifest = {
        "subcommand": subcommand,
        "config": _jsonable({k: v for k, v in config.items()}),
        "versions": {
            "minpulse": __version__,
            "backend": BACKEND,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "results": _jsonable(results),
        "convergence": _jsonable(flags),
        "outputs": [str(output), *map(str, extra_files)],
    }
    path = output.with_suffix(".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _control_rows(result: shooting.ShootingResult) -> list[tuple]:
    control = result.controls
    rows = []
    start = 0.0
    for k, (value, duration) in enumerate(zip(control.values,
                                              control.durations)):
        rows.append((k, start, float(duration), float(value)))
        start += float(duration)
    return rows


_SOLVE_COLUMNS = ["interval", "start", "duration", "value"]


def _family_reference(config: dict, subcommand: str):
    if subcommand == "two-control":
        return analytic.two_control_continuous(mirror=bool(config["mirror"]))
    if subcommand == "one-control":
        return analytic.one_control_continuous(config["delta"])
    return analytic.lz_continuous_reference(config["omega"], config["bound"])


def _solve_result(config: dict, results: dict, result: shooting.ShootingResult,
                  reference) -> dict:
    results.update({
        "t_f": result.t_f,
        "n": result.n,
        "period": result.period,
        "tail": result.tail,
        "residual_norm": result.residual_norm,
        "adjoint": result.adjoint,
        "iterations": result.iterations,
        "seed_id": result.seed_id,
        "continuous_t_f": reference.t_f,
        "gap": result.t_f - reference.t_f,
        "ratio": result.t_f / reference.t_f,
    })
    return results


# ---------------------------------------------------------------------------
# subcommand runners
# ---------------------------------------------------------------------------

def _run_solver_family(subcommand: str, config: dict):
    mode = _solve_mode(config)
    if subcommand == "two-control":
        problem = shooting.two_control_problem(mode,
                                               mirror=bool(config["mirror"]))
    elif subcommand == "one-control":
        _require(config, "delta")
        problem = shooting.one_control_problem(mode, config["delta"],
                                               config["bound"])
    else:
        _require(config, "omega")
        problem = shooting.landau_zener_problem(mode, config["omega"],
                                                config["bound"])
    result = shooting.multistart(problem, rng_seed=config["seed"])
    reference = _family_reference(config, subcommand)
    results = _solve_result(config, {}, result, reference)
    flags = {"converged": result.converged, "rows": result.n,
             "failed_rows": 0}
    return _SOLVE_COLUMNS, _control_rows(result), results, flags, ()


def _run_linear(config: dict):
    _require(config, "omega", "n")
    solution = analytic.linear_discrete(config["omega"], config["n"])
    final = analytic.linear_propagate(config["omega"], solution.period,
                                      solution.phases)
    rows = [(k, k * solution.period, solution.period, float(phase))
            for k, phase in enumerate(solution.phases)]
    results = {
        "t_f": solution.t_f,
        "n": solution.n,
        "period": solution.period,
        "theta": solution.theta,
        "endpoint_error": abs(final - 1.0),
        "continuous_t_f": 1.0,
        "gap": solution.t_f - 1.0,
        "ratio": solution.t_f,
    }
    flags = {"converged": True, "rows": solution.n, "failed_rows": 0}
    return _SOLVE_COLUMNS, rows, results, flags, ()


def _run_grape(config: dict):
    _require(config, "n", "t_start", "t_stop", "t_step")
    if config["n"] < 1:
        raise ConfigError(f"--n must be >= 1, got {config['n']}")
    if not config["t_step"] > 0.0:
        raise ConfigError("--t-step must be positive")
    count = int(round((config["t_stop"] - config["t_start"])
                      / config["t_step"]))
    if count < 0:
        raise ConfigError("--t-stop must not precede --t-start")
    times = [round(config["t_start"] + k * config["t_step"], 12)
             for k in range(count + 1)]
    template = grape.quarter_turn_problem(config["n"], times[-1],
                                          config["method"])
    scan = grape.time_scan(template, times, starts=config["starts"],
                           rng_seed=config["seed"], workers=_workers(),
                           threshold=config["threshold"])
    rows = [(row.t_f, row.distance) for row in scan.rows]
    reached = sum(1 for row in scan.rows
                  if row.distance <= config["threshold"])
    results = {
        "minimum_time": scan.minimum_time,
        "threshold": config["threshold"],
        "starts": config["starts"],
        "method": config["method"],
    }
    flags = {"converged": scan.minimum_time is not None,
             "rows": len(rows), "reached_rows": reached}
    return ["t_f", "distance"], rows, results, flags, ()


def _run_sweep(config: dict):
    _require(config, "family")
    family = config["family"]
    solver_config = dict(config)
    solver_config["mode"] = "locked"
    solver_config["n"] = 1
    if family == "one-control":
        _require(config, "delta")
        if config["bound"] is None:
            solver_config["bound"] = 1.0
    elif family == "landau-zener":
        _require(config, "omega")
        if config["bound"] is None:
            solver_config["bound"] = 2.0
    if config["n_step"] < 1:
        raise ConfigError("--n-step must be >= 1")
    counts = list(range(config["n_start"], config["n_stop"] + 1,
                        config["n_step"]))
    if not counts:
        raise ConfigError("empty sweep: check --n-start/--n-stop")
    mode = shooting.LockedGrid(counts[0])
    if family == "two-control":
        problem = shooting.two_control_problem(
            mode, mirror=bool(config["mirror"]))
    elif family == "one-control":
        problem = shooting.one_control_problem(mode, config["delta"],
                                               solver_config["bound"])
    else:
        problem = shooting.landau_zener_problem(mode, config["omega"],
                                                solver_config["bound"])
    reference = _family_reference(solver_config, family)
    if config["mode"] == "locked":
        rows_in = shooting.convergence_sweep(problem, counts=counts)
    else:
        base = config["period"] if config["period"] is not None \
            else reference.t_f
        periods = [base / n for n in counts]
        rows_in = shooting.convergence_sweep(problem, periods=periods)
    rows = [(r.n, r.period, r.tail, r.t_f, r.t_f - reference.t_f,
             r.converged) for r in rows_in]
    if config["mode"] == "locked":
        produced = {r.n for r in rows_in}
        skipped = [n for n in counts if n not in produced]
    else:
        skipped = len(counts) - len(rows_in)
    flags = {
        "rows": len(rows),
        "converged_rows": sum(1 for r in rows_in if r.converged),
        "failed_rows": sum(1 for r in rows_in if not r.converged),
        "skipped_counts": skipped,
        "converged": bool(rows_in) and all(r.converged for r in rows_in),
    }
    results = {"continuous_t_f": reference.t_f, "family": family}
    wanted = {"exponential": ("exponential",), "polynomial": ("polynomial",),
              "both": _FIT_MODELS, "none": ()}[config["fit"]]
    for model in wanted:
        try:
            fit = fit_convergence(rows_in, reference.t_f, model)
        except InsufficientDataError as exc:
            results[f"fit_{model}"] = {"error": str(exc)}
            continue
        results[f"fit_{model}"] = {
            "intercept": fit.intercept, "slope": fit.slope,
            "r_squared": fit.r_squared, "rows_used": fit.rows_used,
        }
    columns = ["N", "T", "delta_T", "t_f", "gap", "converged"]
    return columns, rows, results, flags, ()


def _run_adjoint_map(config: dict, output: Path, fmt: str):
    _require(config, "n")
    if config["grid_size"] < 2:
        raise ConfigError("--grid-size must be >= 2")
    problem = shooting.two_control_problem(shooting.LockedGrid(config["n"]))
    solved = shooting.multistart(problem, rng_seed=config["seed"])
    sphere = analytic.adjoint_sphere_map(config["n"], solved.period,
                                         grid_size=config["grid_size"])
    rows = []
    for i in range(sphere.theta.size):
        for j in range(sphere.phi.size):
            rows.append((float(sphere.theta[i]), float(sphere.phi[j]),
                         float(sphere.distance[i, j])))
    curve_rows = list(zip(map(float, sphere.curve_theta),
                          map(float, sphere.curve_phi)))
    suffix = ".csv" if fmt == "csv" else ".json"
    curve_path = output.with_name(output.stem + "_curve" + suffix)
    _write_table(curve_path, fmt, ["theta", "phi"], curve_rows)
    results = {
        "t_f": solved.t_f,
        "period": solved.period,
        "grid_size": config["grid_size"],
        "min_distance": float(np.nanmin(sphere.distance)),
        "curve_file": str(curve_path),
    }
    flags = {"converged": solved.converged, "rows": len(rows),
             "failed_rows": 0}
    return ["theta", "phi", "distance"], rows, results, flags, (curve_path,)


def _run_nmr(config: dict):
    _require(config, "nu")
    if not config["nu"] > 0.0:
        raise ConfigError(f"--nu must be positive, got {config['nu']}")
    if not config["digitization"] > 0.0:
        raise ConfigError("--digitization must be positive")
    period = 2.0 * math.pi * config["nu"] * config["digitization"] * 1e-6
    if config["mode"] == "locked":
        _require(config, "n")
        mode = shooting.LockedGrid(config["n"])
    else:
        mode = shooting.FreeTail(period)
    problem = shooting.two_control_problem(mode)
    result = shooting.multistart(problem, rng_seed=config["seed"])
    reference = analytic.two_control_continuous()
    rows = [
        ("continuous", 0, reference.t_f,
         analytic.nmr_time(reference.t_f, config["nu"])),
        ("discrete", result.n, result.t_f,
         analytic.nmr_time(result.t_f, config["nu"])),
    ]
    results = {
        "continuous_t_f": reference.t_f,
        "continuous_microseconds": analytic.nmr_time(reference.t_f,
                                                     config["nu"]),
        "t_f": result.t_f,
        "n": result.n,
        "discrete_microseconds": analytic.nmr_time(result.t_f, config["nu"]),
        "period": period,
        "residual_norm": result.residual_norm,
    }
    flags = {"converged": result.converged, "rows": 2, "failed_rows": 0}
    columns = ["label", "n", "t_f_normalized", "time_microseconds"]
    return columns, rows, results, flags, ()


def _workers() -> int:
    value = os.environ.get("MINPULSE_WORKERS", "").strip()
    if value:
        try:
            workers = int(value)
        except ValueError as exc:
            raise ConfigError(
                f"MINPULSE_WORKERS must be an integer, got {value!r}") from exc
        if workers < 1:
            raise ConfigError("MINPULSE_WORKERS must be >= 1")
        return workers
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def run(argv=None) -> int:
    """Parse arguments, execute one subcommand, write its outputs.

    Returns
    -------
    int
        0 on success, 1 on solver failure, 2 on configuration error.
    """
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        config = _resolve(args)
        sub = args.subcommand
        output = config["output"]
        fmt = config["format"]
        if sub in ("two-control", "one-control", "landau-zener"):
            table = _run_solver_family(sub, config)
        elif sub == "linear":
            table = _run_linear(config)
        elif sub == "grape":
            table = _run_grape(config)
        elif sub == "sweep":
            table = _run_sweep(config)
        elif sub == "adjoint-map":
            table = _run_adjoint_map(config, output, fmt)
        else:
            table = _run_nmr(config)
    except (ConfigError, ValueError) as exc:
        print(f"minpulse: configuration error: {exc}", file=sys.stderr)
        return 2
    except MinpulseError as exc:
        print(f"minpulse: solver failure: {exc}", file=sys.stderr)
        return 1
    columns, rows, results, flags, extra = table
    _write_table(output, fmt, columns, rows)
    _write_manifest(output, args.subcommand, config, results, flags, extra)
    return 0


def main() -> None:
    """Console entry point."""
    sys.exit(run())
