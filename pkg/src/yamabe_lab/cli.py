"""Batch experiment runner.

Usage::

    yamabe-lab <command> --config <path> [--out <dir>] [--seed <u64>]

Commands: curvature, minimize, multi-start, scan, check-derivatives,
certify.  The configuration is a strict TOML file; unknown keys are
rejected.  Every run writes a ``manifest.json`` (config echo, library
version, wall time, status) even on failure, result tables as CSV with
17-significant-digit floats plus a JSON mirror, and field snapshots.

Exit status: 0 on success, 2 on validation or I/O errors, 3 on solver
non-convergence (partial outputs are still written).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
try:
    import tomllib
except ModuleNotFoundError:        # Python 3.10
    import tomli as tomllib
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .calculus import integrate, scalar_curvature, volume_density, riemannian_volume
from .certificate import assemble, dual_sample_check, hull_feasibility
from .charts import GridChart
from .conformal import (class_path, conformal_split, dQ_conformal_direction,
                        dQ_full, path_velocity, q_map, recombine,
                        total_scalar_quotient, trace_free_project)
from .cylinder import BranchPoint, bifurcation_scan
from .errors import ConfigError, YamabeLabError
from .fields import MetricField, ScalarField, TensorField
from .snapshot import chart_from_descriptor, read_field, write_field
from .solver import SolverOptions, einstein_residual, minimize_in_class, multi_start
from .synthetic import (conformally_flat_metric, perturbed_flat_metric,
                        random_symmetric_tensor, random_trig_scalar)

COMMANDS = ("curvature", "minimize", "multi-start", "scan",
            "check-derivatives", "certify")

# allowed top-level tables/keys per command; seed is always allowed
_SCHEMAS = {
    "curvature": {"chart", "metric", "output", "seed"},
    "minimize": {"chart", "metric", "solver", "output", "seed"},
    "multi-start": {"chart", "metric", "solver", "output", "seed"},
    "scan": {"scan", "output", "seed"},
    "check-derivatives": {"chart", "metric", "derivative_check", "output", "seed"},
    "certify": {"certify", "output", "seed"},
}

_STOCHASTIC = {"multi-start", "check-derivatives", "certify"}

_TABLE_KEYS = {
    "chart": {"kind", "dim", "resolution", "periods", "radius",
              "circumference", "sphere_radius"},
    "metric": {"kind", "amplitude", "axis", "mode", "modes"},
    "solver": {"tol", "max_iter", "seeds", "dedup_tol", "seed_amplitude"},
    "scan": {"l_min", "l_max", "steps", "dim", "sphere_radius"},
    "derivative_check": {"directions", "epsilon", "amplitude", "modes"},
    "certify": {"ensemble", "manifest_path", "directions", "tol",
                "resolution", "periods"},
    "output": {"formats"},
}


def _check_keys(table: dict, allowed: set, context: str) -> None:
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {context}: {sorted(unknown)}")


def load_config(path: Path, command: str, seed_override=None) -> dict:
    try:
        with open(path, "rb") as fh:
            config = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    _check_keys(config, _SCHEMAS[command], "config root")
    for name, table in config.items():
        if isinstance(table, dict):
            _check_keys(table, _TABLE_KEYS.get(name, set()), f"[{name}]")
    if seed_override is not None:
        config["seed"] = int(seed_override)
    if command in _STOCHASTIC and "seed" not in config:
        raise ConfigError(f"command {command!r} requires an rng seed "
                          "(config key 'seed' or --seed)")
    metric_kind = config.get("metric", {}).get("kind", "flat")
    if metric_kind in ("conformally-flat-random", "perturbed-flat") \
            and "seed" not in config:
        raise ConfigError(f"metric kind {metric_kind!r} requires an rng seed")
    return config


def build_chart(cfg: dict) -> GridChart:
    kind = cfg.get("kind", "periodic-grid")
    if kind == "periodic-grid":
        resolution = cfg.get("resolution")
        if resolution is None:
            raise ConfigError("[chart] periodic-grid needs 'resolution'")
        periods = cfg.get("periods", [1.0] * len(resolution))
        return GridChart.periodic(resolution, periods)
    if kind == "round-sphere":
        return GridChart.round_sphere(cfg.get("radius", 1.0), cfg.get("dim", 3))
    if kind == "product-cylinder":
        if "circumference" not in cfg:
            raise ConfigError("[chart] product-cylinder needs 'circumference'")
        return GridChart.product_cylinder(cfg["circumference"],
                                          cfg.get("sphere_radius", 1.0),
                                          cfg.get("dim", 3))
    if kind == "flat-torus-model":
        return GridChart.flat_torus_model(cfg.get("periods", [1.0, 1.0, 1.0]))
    raise ConfigError(f"unknown chart kind {kind!r}")


def build_metric(chart: GridChart, cfg: dict, rng) -> MetricField:
    kind = cfg.get("kind", "flat")
    if kind == "flat":
        return MetricField.flat(chart)
    chart.require_grid(f"metric kind {kind!r}")
    n = chart.dim
    if kind == "conformal-sine":
        amplitude = cfg.get("amplitude", 0.2)
        axis = cfg.get("axis", 0)
        mode = cfg.get("mode", 1)
        x = chart.meshgrid()[axis]
        phi = 1.0 + amplitude * np.sin(2 * np.pi * mode * x / chart.periods[axis])
        factor = phi ** (4.0 / (n - 2))
        return MetricField(chart, factor[..., None, None] * np.eye(n))
    if kind == "conformally-flat-random":
        f = random_trig_scalar(chart, rng, cfg.get("modes", 2),
                               cfg.get("amplitude", 0.1))
        return conformally_flat_metric(chart, f)
    if kind == "perturbed-flat":
        return perturbed_flat_metric(chart, rng, cfg.get("amplitude", 0.05),
                                     cfg.get("modes", 1))
    raise ConfigError(f"unknown metric kind {kind!r}")


def build_solver_options(cfg: dict) -> SolverOptions:
    opts = SolverOptions()
    if "tol" in cfg:
        opts.tol = float(cfg["tol"])
    if "max_iter" in cfg:
        opts.max_iter = int(cfg["max_iter"])
    if "dedup_tol" in cfg:
        opts.dedup_tol = float(cfg["dedup_tol"])
    if "seed_amplitude" in cfg:
        opts.seed_amplitude = float(cfg["seed_amplitude"])
    return opts


# ----------------------------------------------------------------------
# table emission

def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def emit_table(rows: list, columns: list, name: str, out_dir: Path,
               formats=("csv", "json")) -> list:
    """Write a homogeneous row table deterministically; returns the paths."""
    written = []
    if "csv" in formats:
        path = out_dir / f"{name}.csv"
        lines = [",".join(columns)]
        for row in rows:
            lines.append(",".join(_format_cell(row[c]) for c in columns))
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    if "json" in formats:
        path = out_dir / f"{name}.json"
        clean = [{c: (float(row[c]) if isinstance(row[c], (float, np.floating))
                      else (bool(row[c]) if isinstance(row[c], (bool, np.bool_))
                            else (int(row[c]) if isinstance(row[c], (int, np.integer))
                                  else str(row[c]))))
                  for c in columns} for row in rows]
        path.write_text(json.dumps({"columns": columns, "rows": clean},
                                   sort_keys=True, indent=1) + "\n")
        written.append(path)
    return written


# ----------------------------------------------------------------------
# command implementations; each returns (exit_code, outputs)

def _run_curvature(config, out_dir, rng, formats):
    chart = build_chart(config.get("chart", {}))
    g = build_metric(chart, config.get("metric", {}), rng)
    scal = scalar_curvature(g)
    row = {
        "r_min": float(np.min(scal.values)),
        "r_max": float(np.max(scal.values)),
        "r_mean_volume_weighted": integrate(scal, volume_density(g))
        / riemannian_volume(g),
        "volume": riemannian_volume(g),
        "einstein_residual": einstein_residual(g),
        "total_scalar_quotient": total_scalar_quotient(g),
    }
    outputs = emit_table([row], list(row), "curvature", out_dir, formats)
    snap = out_dir / "scalar_curvature.field"
    write_field(snap, scal)
    outputs.append(snap)
    return 0, outputs


def _solution_row(sol, index=0):
    return {
        "index": index,
        "lambda": float(sol.lam),
        "quotient": float(sol.quotient),
        "residual": float(sol.residual),
        "iterations": int(sol.iterations),
        "converged": bool(sol.converged),
        "message": sol.message or "ok",
    }


def _run_minimize(config, out_dir, rng, formats):
    chart = build_chart(config.get("chart", {}))
    g0 = build_metric(chart, config.get("metric", {}), rng)
    opts = build_solver_options(config.get("solver", {}))
    sol = minimize_in_class(g0, opts)
    outputs = emit_table([_solution_row(sol)], list(_solution_row(sol)),
                         "solution", out_dir, formats)
    if sol.phi is not None:
        snap = out_dir / "conformal_factor.field"
        write_field(snap, sol.phi)
        outputs.append(snap)
    if sol.metric is not None:
        snap = out_dir / "metric.field"
        write_field(snap, sol.metric)
        outputs.append(snap)
    return (0 if sol.converged else 3), outputs


def _run_multi_start(config, out_dir, rng, formats):
    chart = build_chart(config.get("chart", {}))
    g0 = build_metric(chart, config.get("metric", {}), rng)
    solver_cfg = config.get("solver", {})
    opts = build_solver_options(solver_cfg)
    seeds = int(solver_cfg.get("seeds", 5))
    sols = multi_start(g0, seeds, config["seed"], opts)
    rows = [_solution_row(s, i) for i, s in enumerate(sols)]
    columns = list(rows[0]) if rows else ["index", "lambda", "quotient",
                                          "residual", "iterations",
                                          "converged", "message"]
    outputs = emit_table(rows, columns, "solutions", out_dir, formats)
    for i, s in enumerate(sols):
        if s.phi is not None:
            snap = out_dir / f"conformal_factor_{i}.field"
            write_field(snap, s.phi)
            outputs.append(snap)
    any_converged = any(s.converged for s in sols)
    return (0 if any_converged else 3), outputs


def _run_scan(config, out_dir, rng, formats):
    cfg = config.get("scan", {})
    for key in ("l_min", "l_max", "steps"):
        if key not in cfg:
            raise ConfigError(f"[scan] needs '{key}'")
    result = bifurcation_scan(float(cfg["l_min"]), float(cfg["l_max"]),
                              int(cfg["steps"]), int(cfg.get("dim", 3)),
                              float(cfg.get("sphere_radius", 1.0)))
    rows = []
    for bp in result.branches:
        rows.append({
            "circumference": float(bp.L),
            "kind": bp.kind,
            "bumps": int(bp.bumps),
            "lambda": float(bp.lam),
            "u_min": float(np.min(bp.u)),
            "u_max": float(np.max(bp.u)),
            "closure_error": float(bp.closure_error),
        })
    columns = ["circumference", "kind", "bumps", "lambda", "u_min", "u_max",
               "closure_error"]
    outputs = emit_table(rows, columns, "branches", out_dir, formats)
    summary = {"first_bifurcation": float(result.l_star)
               if result.l_star is not None else float("nan"),
               "branch_count": len(result.branches)}
    outputs += emit_table([summary], list(summary), "scan_summary", out_dir,
                          formats)
    return 0, outputs


def _run_check_derivatives(config, out_dir, rng, formats):
    chart = build_chart(config.get("chart", {}))
    g = build_metric(chart, config.get("metric", {}), rng)
    cfg = config.get("derivative_check", {})
    count = int(cfg.get("directions", 20))
    eps = float(cfg.get("epsilon", 1e-4))
    amplitude = float(cfg.get("amplitude", 0.05))
    modes = int(cfg.get("modes", 1))
    n = chart.dim
    split = conformal_split(g)
    rows = []
    for index in range(count):
        h = random_symmetric_tensor(chart, rng, modes=modes, amplitude=amplitude)
        analytic = dQ_full(g, h)
        plus = MetricField(chart, g.components + eps * h.components)
        minus = MetricField(chart, g.components - eps * h.components)
        fd = (total_scalar_quotient(plus) - total_scalar_quotient(minus)) / (2 * eps)
        rows.append({"index": index, "kind": "full", "analytic": analytic,
                     "finite_difference": fd,
                     "rel_error": abs(analytic - fd) / max(abs(fd), 1e-300)})
        raw = random_symmetric_tensor(chart, rng, modes=modes, amplitude=amplitude,
                                      weight=Fraction(-2, n))
        w = trace_free_project(split.c, raw)
        analytic = dQ_conformal_direction(split.omega, split.c, w)
        q_plus = total_scalar_quotient(
            recombine(split.omega, class_path(split.c, w, eps)))
        q_minus = total_scalar_quotient(
            recombine(split.omega, class_path(split.c, w, -eps)))
        fd = (q_plus - q_minus) / (2 * eps)
        rows.append({"index": index, "kind": "conformal", "analytic": analytic,
                     "finite_difference": fd,
                     "rel_error": abs(analytic - fd) / max(abs(fd), 1e-300)})
    columns = ["index", "kind", "analytic", "finite_difference", "rel_error"]
    outputs = emit_table(rows, columns, "derivative_checks", out_dir, formats)
    return 0, outputs


def _load_manifest_ensemble(manifest_path: Path):
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    chart = chart_from_descriptor(manifest["chart"])
    metrics = []
    base = manifest_path.parent
    for rel in manifest["members"]:
        g = read_field(base / rel)
        if not isinstance(g, MetricField):
            raise ConfigError(f"ensemble member {rel} is not a metric snapshot")
        if g.chart != chart:
            raise ConfigError(f"ensemble member {rel} chart mismatch")
        metrics.append(g)
    return metrics


def _run_certify(config, out_dir, rng, formats):
    cfg = config.get("certify", {})
    ensemble_kind = cfg.get("ensemble", "singleton-flat")
    tol = float(cfg.get("tol", 1e-7))
    directions = int(cfg.get("directions", 100))
    if ensemble_kind == "singleton-flat":
        resolution = cfg.get("resolution", [16, 16, 16])
        periods = cfg.get("periods", [1.0] * len(resolution))
        chart = GridChart.periodic(resolution, periods)
        metrics = [MetricField.flat(chart)]
    elif ensemble_kind == "manifest":
        if "manifest_path" not in cfg:
            raise ConfigError("[certify] ensemble 'manifest' needs 'manifest_path'")
        metrics = _load_manifest_ensemble(Path(cfg["manifest_path"]))
    else:
        raise ConfigError(f"unknown ensemble kind {ensemble_kind!r}")
    c = conformal_split(metrics[0]).c
    ens = assemble(metrics, c)
    result = hull_feasibility(ens, tol)
    dual = dual_sample_check(ens, directions, config["seed"])
    record = {
        "status": result.status,
        "weights": [float(w) for w in result.weights],
        "residual": float(result.residual),
        "margin": None if result.margin is None else float(result.margin),
        "iterations": int(result.iterations),
        "dual_sample_worst": float(dual.worst_value),
        "dual_counterexample_found": dual.counterexample is not None,
        "members": len(metrics),
    }
    path = out_dir / "certificate.json"
    path.write_text(json.dumps(record, sort_keys=True, indent=1) + "\n")
    row = {"status": result.status, "residual": float(result.residual),
           "margin": float(result.margin) if result.margin is not None
           else float("nan"),
           "dual_sample_worst": float(dual.worst_value),
           "members": len(metrics)}
    outputs = [path] + emit_table([row], list(row), "certificate_summary",
                                  out_dir, formats)
    return 0, outputs


_RUNNERS = {
    "curvature": _run_curvature,
    "minimize": _run_minimize,
    "multi-start": _run_multi_start,
    "scan": _run_scan,
    "check-derivatives": _run_check_derivatives,
    "certify": _run_certify,
}


def run(command: str, config: dict, out_dir: Path) -> int:
    """Execute one experiment; always writes a manifest."""
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    manifest = {
        "command": command,
        "config": config,
        "library_version": __version__,
        "thread_cap": os.environ.get("YAMABE_LAB_THREADS"),
        "status": "failed",
        "error": None,
        "outputs": [],
    }
    code = 2
    try:
        rng = np.random.default_rng(config.get("seed"))
        formats = tuple(config.get("output", {}).get("formats", ("csv", "json")))
        code, outputs = _RUNNERS[command](config, out_dir, rng, formats)
        manifest["outputs"] = sorted(p.name for p in outputs)
        manifest["status"] = {0: "ok", 3: "non-convergence"}.get(code, "failed")
    except YamabeLabError as exc:
        manifest["error"] = str(exc)
        code = 2
    except OSError as exc:
        manifest["error"] = f"I/O error: {exc}"
        code = 2
    finally:
        manifest["wall_time_s"] = time.monotonic() - started
        with open(out_dir / "manifest.json", "w") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=1)
            fh.write("\n")
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="yamabe-lab",
        description="curvature, CSC-solver, bifurcation, and certificate experiments")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, type=Path)
    parser.add_argument("--out", type=Path, default=None)
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)
    out_dir = args.out if args.out is not None else Path(f"{args.command}-out")
    try:
        config = load_config(args.config, args.command, args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        # still record the failure for post-mortem
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "manifest.json", "w") as fh:
            json.dump({"command": args.command, "status": "failed",
                       "error": str(exc), "library_version": __version__},
                      fh, sort_keys=True, indent=1)
            fh.write("\n")
        return 2
    code = run(args.command, config, out_dir)
    if code != 0:
        print(f"run finished with status {code}; see manifest in {out_dir}",
              file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
