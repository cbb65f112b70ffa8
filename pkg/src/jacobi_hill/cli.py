"""Command-line runner: ``jacobi-hill <subcommand> --config <path> [--out <dir>] [--seed <n>]``.

Exit codes: 0 success, 1 configuration or schema error, 2 numerical
tolerance failure, 3 metric validation rejection. The output directory is
taken from ``--out``, else the ``JACOBI_HILL_OUT`` environment variable,
else the config's ``output.directory``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .errors import (
    DegenerateMetricError,
    ExprSyntaxError,
    JacobiHillError,
    MetricValidationError,
)
from .flow import integrate_geodesic, unit_speed_point, write_csv
from .jacobi import integrate_jacobi_frame
from .metrics import (
    ConformalChartMetric,
    KolokoltsovSphereMetric,
    LiouvilleTorusMetric,
    metric_from_config,
)

log = logging.getLogger("jacobi_hill")

ENV_OUT = "JACOBI_HILL_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_TOL, EXIT_METRIC = 0, 1, 2, 3
SUBCOMMANDS = ("curvature", "geodesic", "jacobi", "saddles", "fundamental", "conjugate", "verify")

_NUM = {"type": "number"}
_VEC2 = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["metric"],
    "properties": {
        "metric": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["liouville-torus", "kolokoltsov-sphere", "conformal-chart"]},
                "f": {"type": "string"},
                "h": {"type": "string"},
                "lambda": {"type": "string"},
                "L": {"type": "number", "exclusiveMinimum": 0},
                "smoothness_k": {"type": "integer", "minimum": 0},
                "domain": {"type": "array", "items": _NUM, "minItems": 4, "maxItems": 4},
            },
            "allOf": [
                {
                    "if": {"properties": {"kind": {"const": "conformal-chart"}}},
                    "then": {"required": ["lambda"]},
                    "else": {"required": ["f", "h"]},
                }
            ],
        },
        "run": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "initial_point": _VEC2,
                "angle": _NUM,
                "momentum": _VEC2,
                "t_max": {"type": "number", "exclusiveMinimum": 0},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "base_time": _NUM,
                "window": _NUM,
                "samples": {"type": "integer", "minimum": 2},
                "grid": {"type": "integer", "minimum": 2},
                "jacobi_initial": {"type": "array", "items": _NUM, "minItems": 4, "maxItems": 4},
                "x1": _NUM,
                "n_points": {"type": "integer", "minimum": 1},
                "n_trajectories": {"type": "integer", "minimum": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "json"]}, "uniqueItems": True},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}


class ConfigError(Exception):
    pass


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {exc.message}") from exc
    return cfg


def output_dir(cfg, cli_out=None):
    out = cli_out or os.environ.get(ENV_OUT) or cfg.get("output", {}).get("directory") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _dump_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _formats(cfg):
    return set(cfg.get("output", {}).get("formats", ["csv", "json"]))


def _initial_state(metric, run):
    """Phase point from run.initial_point plus run.momentum or run.angle (unit speed)."""
    if "initial_point" in run:
        x, y = run["initial_point"]
    elif isinstance(metric, ConformalChartMetric):
        x, y = 0.3, -0.2
    else:
        x, y = 0.1234, 0.4321
    if "momentum" in run:
        return np.array([x, y, *run["momentum"]], float)
    return np.array(unit_speed_point(metric, x, y, run.get("angle", 0.7)))


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def cmd_curvature(metric, cfg, out, seed):
    run = cfg.get("run", {})
    n = run.get("grid", 33)
    if isinstance(metric, ConformalChartMetric):
        x0, x1, y0, y1 = metric.domain
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, metric.L
    xs, ys = np.linspace(x0, x1, n), np.linspace(y0, y1, n)
    rows = []
    for x in xs:
        for y in ys:
            try:
                K = metric.gauss_curvature(float(x), float(y))
            except JacobiHillError:
                K = float("nan")
            rows.append([x, y, metric.lam(float(x), float(y)), K])
    write_csv(out / "curvature.csv", ["x", "y", "lambda", "K"], rows)
    return {"files": ["curvature.csv"], "samples": len(rows)}


def cmd_geodesic(metric, cfg, out, seed):
    run = cfg.get("run", {})
    p0 = _initial_state(metric, run)
    t_max = run.get("t_max", 10.0)
    traj = integrate_geodesic(metric, p0, (0.0, t_max), tol=run.get("tol", 1e-10))
    ts = np.linspace(0.0, t_max, run.get("samples", 201))
    traj.to_csv(out / "trajectory.csv", ts)
    dH, dF = traj.conservation_errors()
    return {"files": ["trajectory.csv"], "drift_H": dH, "drift_F": dF}


def cmd_jacobi(metric, cfg, out, seed):
    run = cfg.get("run", {})
    p0 = _initial_state(metric, run)
    t_max = run.get("t_max", 10.0)
    traj = integrate_geodesic(metric, p0, (0.0, t_max), tol=run.get("tol", 1e-10))
    evo = integrate_jacobi_frame(traj, run.get("jacobi_initial", [0.0, 1.0, 0.0, 0.0]))
    ts = np.linspace(0.0, t_max, run.get("samples", 201))
    evo.to_csv(out / "jacobi.csv", ts)
    return {"files": ["jacobi.csv"]}


def cmd_saddles(metric, cfg, out, seed):
    from .saddle import enumerate_critical_circles, floquet_multipliers

    if not isinstance(metric, (LiouvilleTorusMetric, KolokoltsovSphereMetric)):
        raise ConfigError("saddles needs a liouville-torus or kolokoltsov-sphere metric")
    items = []
    for c in enumerate_critical_circles(metric):
        d = c.to_dict()
        d["label"] = c.label
        if c.simple:
            fl = floquet_multipliers(metric, c)
            d["floquet"] = {"kind": fl.kind, "period": fl.period, "trace": float(np.trace(fl.monodromy))}
        items.append(d)
    _dump_json(out / "saddles.json", {"circles": items})
    return {"files": ["saddles.json"], "count": len(items)}


def cmd_fundamental(metric, cfg, out, seed):
    from .saddle import FundamentalSolution, enumerate_critical_circles, fundamental_solution_torus

    run = cfg.get("run", {})
    samples = run.get("samples", 33)
    files = []
    if isinstance(metric, KolokoltsovSphereMetric):
        from .sphere import fundamental_solution_sphere

        fs, report = fundamental_solution_sphere(metric, require_hyperbolic=False)
        solutions = [("gamma1", fs)]
    elif isinstance(metric, LiouvilleTorusMetric):
        solutions = [
            (c.label, fundamental_solution_torus(metric, c)) for c in enumerate_critical_circles(metric) if c.hyperbolic
        ]
    else:
        raise ConfigError("fundamental needs a liouville-torus or kolokoltsov-sphere metric")
    doc = {name: json.loads(fs.dumps(samples)) for name, fs in solutions}
    _dump_json(out / "fundamental.json", doc)
    files.append("fundamental.json")
    rows = []
    for name, fs in solutions:
        for k, seg in enumerate(fs.segments):
            sj = doc[name]["segments"][k]
            for s, up, um in zip(sj["param"], sj["u_plus"], sj["u_minus"]):
                rows.append([len(rows), k, s, up, um])
    if "csv" in _formats(cfg):
        write_csv(out / "fundamental.csv", ["row", "segment", "s", "u_plus", "u_minus"], rows)
        files.append("fundamental.csv")
    return {"files": files, "solutions": [name for name, _ in solutions]}


def cmd_conjugate(metric, cfg, out, seed):
    from .conjugacy import find_conjugate_points

    run = cfg.get("run", {})
    if isinstance(metric, KolokoltsovSphereMetric) and "x1" in run:
        from .sphere import solve_conjugate_sphere

        res = solve_conjugate_sphere(metric, run["x1"], require_hyperbolic=False)
        _dump_json(out / "conjugate.json", res.to_dict())
        return {"files": ["conjugate.json"], "found": res.found}
    p0 = _initial_state(metric, run)
    t_max = run.get("t_max", 10.0)
    t_a = run.get("base_time", 0.0)
    traj = integrate_geodesic(metric, p0, (min(0.0, t_a), t_max), tol=run.get("tol", 1e-10))
    rep = find_conjugate_points(metric, traj, t_a, run.get("window", t_max - t_a))
    _dump_json(out / "conjugate.json", rep.to_dict())
    return {"files": ["conjugate.json"], "N": rep.N}


def cmd_verify(metric, cfg, out, seed):
    from .verify import run_suite

    run = cfg.get("run", {})
    checks = run_suite(
        metric,
        seed=seed,
        n_points=run.get("n_points", 20),
        n_traj=run.get("n_trajectories", 3),
        t_max=run.get("t_max", 10.0),
    )
    for c in checks:
        print(c.row())
    ok = all(c.passed for c in checks)
    print(f"{'PASS' if ok else 'FAIL'}  {sum(c.passed for c in checks)}/{len(checks)} checks")
    _dump_json(out / "verify.json", {"seed": seed, "passed": ok, "checks": [c.to_dict() for c in checks]})
    return {"files": ["verify.json"], "passed": ok}


COMMANDS = {
    "curvature": cmd_curvature,
    "geodesic": cmd_geodesic,
    "jacobi": cmd_jacobi,
    "saddles": cmd_saddles,
    "fundamental": cmd_fundamental,
    "conjugate": cmd_conjugate,
    "verify": cmd_verify,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="jacobi-hill", description="Jacobi fields and conjugate points on Liouville surfaces")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="scenario JSON file")
    ap.add_argument("--out", default=None, help=f"output directory (overrides ${ENV_OUT} and the config)")
    ap.add_argument("--seed", type=int, default=None, help="seed for randomised checks (default: config seed or 0)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        if seed < 0:
            raise ConfigError("seed must be non-negative")
        metric = metric_from_config(cfg["metric"])
        out = output_dir(cfg, args.out)
        summary = COMMANDS[args.subcommand](metric, cfg, out, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExprSyntaxError as exc:
        print(f"config error: bad expression: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MetricValidationError, DegenerateMetricError) as exc:
        name = getattr(exc, "invariant", None)
        label = f" [{name}]" if name else ""
        print(f"metric rejected{label}: {exc}", file=sys.stderr)
        return EXIT_METRIC
    except JacobiHillError as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_TOL
    log.info("summary %s", json.dumps(summary, sort_keys=True, default=_json_default))
    if args.subcommand == "verify" and not summary["passed"]:
        return EXIT_TOL
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
