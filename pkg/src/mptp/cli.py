"""
Command-line front end.

    mptp solve     --config ou.json --out out/
    mptp action    --config ou.json --path out/path.csv --out out/
    mptp table1    --out out/
    mptp mc-verify [--config ou.json] --out out/ --seed 7
    mptp density   --config ou.json --out out/

Exit codes: 0 success, 1 configuration, 2 solver, 3 statistics.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path as FsPath

import numpy as np

from . import __version__
from .action import action_report
from .lineardyn import (BridgeSingularityError, LinearModel, bridge_moments,
                        bridge_density, gaussian_density, moments, ou_analytic_path)
from .mcverify import DivergenceError, StatisticalPowerError, om_ratio_check
from .model import ConfigError, Path, RegistryError, build_problem, override, to_document
from .routes import (TABLE1_L, TABLE1_ROWS, APPROX_VALID_L, solve_problem, table1_cell)
from .solvers import IntegrationError, NonconvergenceError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_STATS = 0, 1, 2, 3

MC_DEFAULT = {
    "potential": {"id": "ou", "params": {"theta": 2.0, "mu": 1.0}},
    "x0": [0.0], "xl": [1.0], "l": 1.0, "sigma": 1.0,
}


class CommandError(Exception):
    def __init__(self, code: int, kind: str, message: str, **extra):
        self.code = code
        self.kind = kind
        self.extra = extra
        super().__init__(message)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_path_csv(path: Path, fname) -> None:
    with open(fname, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"psi_{i + 1}" for i in range(path.dim)])
        for t, row in zip(path.times, path.values):
            w.writerow([_fmt(t)] + [_fmt(v) for v in row])


def read_path_csv(fname) -> Path:
    with open(fname, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or rows[0][0] != "t":
        raise ConfigError("path", f"{fname} is not a path CSV")
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    t = data[:, 0]
    dt = (t[-1] - t[0]) / (len(t) - 1) if len(t) > 1 else 1.0
    if len(t) > 2 and np.max(np.abs(np.diff(t) - dt)) > 1e-9 * max(1.0, abs(t[-1])):
        raise ConfigError("path", "time grid is not uniform")
    return Path(t[0], dt, data[:, 1:])


def _write_json(doc, fname) -> None:
    with open(fname, "w") as fh:
        json.dump(_finite(doc), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _finite(obj):
    """Replace non-finite floats by None so documents stay valid JSON."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _finite(obj.tolist())
    return obj


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def _load_doc(args, default=None) -> dict:
    if args.config is None:
        if default is None:
            raise ConfigError("--config", "a config file is required for this command")
        doc = json.loads(json.dumps(default))
    else:
        try:
            text = FsPath(args.config).read_text()
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {args.config}: {exc.strerror}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<document>", f"parse error: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("<document>", "top level must be an object")
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError("--set", f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        doc = override(doc, key.strip(), value.strip())
    if getattr(args, "dt", None) is not None:
        doc["dt"] = args.dt
    if getattr(args, "method", None) is not None:
        doc["method"] = args.method
    return doc


def _out_dir(args) -> FsPath:
    out = FsPath(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def run_solve(args) -> int:
    spec = build_problem(_load_doc(args))
    sol = solve_problem(spec)
    out = _out_dir(args)
    write_path_csv(sol.path, out / "path.csv")
    rep = action_report(sol.path, spec.potential, spec.sigma)
    for w in sol.warnings:
        print(f"warning: {w}", file=sys.stderr)
    _write_json({
        "command": "solve",
        "problem": to_document(spec),
        "method": sol.method,
        "actions": rep.to_dict(),
        "endpoint_error": sol.endpoint_error,
        "iterations": sol.iterations,
        "final_value": sol.path.values[-1].tolist(),
        "warnings": sol.warnings,
    }, out / "summary.json")
    return EXIT_OK


def run_action(args) -> int:
    spec = build_problem(_load_doc(args))
    out = _out_dir(args)
    src = FsPath(args.path) if args.path else out / "path.csv"
    try:
        path = read_path_csv(src)
    except OSError as exc:
        raise ConfigError("--path", f"cannot read {src}: {exc.strerror}") from None
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("--path", str(exc)) from None
    if path.dim != spec.potential.dim:
        raise ConfigError("--path", "path dimension does not match the potential")
    rep = action_report(path, spec.potential, spec.sigma)
    _write_json({"command": "action", "problem": to_document(spec), "path_file": str(src),
                 "actions": rep.to_dict()}, out / "action.json")
    return EXIT_OK


def run_table1(args) -> int:
    out = _out_dir(args)
    dt = args.dt if args.dt is not None else 1e-4
    cells = {}
    for row in TABLE1_ROWS:
        cells[row] = [table1_cell(row, l, dt) for l in TABLE1_L]
    with open(out / "table1.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path"] + [f"l={l}" for l in TABLE1_L])
        for row in TABLE1_ROWS:
            w.writerow([row] + ["NC" if v is None else _fmt(v) for v in cells[row]])
    if max(TABLE1_L) > APPROX_VALID_L:
        print(f"warning: approximation rows for l > {APPROX_VALID_L:g} are outside "
              "their short-horizon validity window", file=sys.stderr)
    return EXIT_OK


def _candidate_paths(spec_doc: dict, n_fine: int, amp: float):
    spec = build_problem(dict(spec_doc, dt=spec_doc["l"] / n_fine,
                              method="el_shooting" if spec_doc["potential"]["id"] == "free"
                              else "linear_bridge"))
    p = spec.potential
    if p.id == "ou":
        psi1 = ou_analytic_path(p.params["theta"], p.params["mu"], spec.sigma,
                                float(spec.x0[0]), float(spec.xl[0]), spec.l, spec.dt)
    elif p.id == "free":
        s = np.linspace(0.0, 1.0, n_fine + 1)[:, None]
        psi1 = Path(0.0, spec.l / n_fine, spec.x0 + s * (spec.xl - spec.x0))
    else:
        raise ConfigError("potential.id", "mc-verify supports the ou and free potentials")
    bump = amp * np.sin(np.pi * psi1.times / spec.l)[:, None]
    psi2 = Path(0.0, psi1.dt, psi1.values + bump)
    return spec, psi1, psi2


def run_mc_verify(args) -> int:
    doc = _load_doc(args, default=MC_DEFAULT)
    doc.pop("dt", None)
    doc.pop("method", None)
    if isinstance(doc.get("potential"), str):
        doc["potential"] = {"id": doc["potential"]}
    pid = (doc.get("potential") or {}).get("id")
    if pid not in ("ou", "free"):
        raise ConfigError("potential.id", "mc-verify supports the ou and free potentials")
    n_fine = args.tube_nodes * args.substeps
    build_problem(doc)
    spec, psi1, psi2 = _candidate_paths(doc, n_fine, args.amp)
    try:
        rep = om_ratio_check(spec.potential, spec.sigma, spec.x0, spec.xl, spec.l,
                             spec.l / args.tube_nodes, psi1, psi2, args.delta, args.n,
                             args.seed, substeps=args.substeps)
    except (StatisticalPowerError, DivergenceError) as exc:
        raise CommandError(EXIT_STATS, type(exc).__name__, str(exc))
    out = _out_dir(args)
    doc = rep.to_dict()
    doc["command"] = "mc-verify"
    doc["perturbation_amplitude"] = args.amp
    _write_json(doc, out / "mc_report.json")
    return EXIT_OK


def run_density(args) -> int:
    spec = build_problem(_load_doc(args))
    p = spec.potential
    if p.id not in ("ou", "linear") or p.dim != 1:
        raise CommandError(EXIT_CONFIG, "UnsupportedPotential",
                           "density needs a one-dimensional linear or ou potential")
    m = LinearModel.from_potential(p, spec.sigma)
    x0, xl, l = spec.x0, spec.xl, spec.l
    ts = l * np.arange(1, args.nt + 1) / args.nt
    out = _out_dir(args)
    with open(out / "density.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "transition_density", "bridge_density"])
        for t in ts:
            mo = moments(m, x0, t)
            sd = math.sqrt(mo.cov[0, 0])
            xs = mo.mean[0] + sd * np.linspace(-8.0, 8.0, args.nx)
            trans = gaussian_density(m, xs[:, None], t, x0)
            if t < l:
                bridge = bridge_density(m, xs[:, None], t, x0, xl, l)
            else:
                bridge = np.full(xs.shape, np.nan)
            for x, a, b in zip(xs, trans, bridge):
                w.writerow([_fmt(t), _fmt(x), _fmt(a), "" if not np.isfinite(b) else _fmt(b)])
    summary = {"command": "density", "problem": to_document(spec), "slices": []}
    for t in ts[:-1]:
        bm = bridge_moments(m, x0, xl, l, t)
        summary["slices"].append({"t": t, "bridge_mean": bm.mean[0],
                                  "bridge_variance": bm.cov[0, 0]})
    _write_json(summary, out / "density_summary.json")
    return EXIT_OK


COMMANDS = {
    "solve": run_solve,
    "action": run_action,
    "table1": run_table1,
    "mc-verify": run_mc_verify,
    "density": run_density,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mptp", description="Most probable transition paths.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON problem document")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (dotted keys reach into potential)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--dt", type=float)
        p.add_argument("--method")
        return p

    common(sub.add_parser("solve", help="compute a most probable path"))
    a = common(sub.add_parser("action", help="evaluate actions of a path CSV"))
    a.add_argument("--path", help="path CSV (default: OUT/path.csv)")
    common(sub.add_parser("table1", help="double-well action table"), config_required=False)
    mc = common(sub.add_parser("mc-verify", help="Monte-Carlo tube-ratio check"),
                config_required=False)
    mc.add_argument("--n", type=int, default=200_000)
    mc.add_argument("--delta", type=float, default=0.2)
    mc.add_argument("--amp", type=float, default=0.45,
                    help="amplitude of the sine bump added to the reference path")
    mc.add_argument("--tube-nodes", type=int, default=8)
    mc.add_argument("--substeps", type=int, default=125)
    d = common(sub.add_parser("density", help="transition and bridge densities on a grid"))
    d.add_argument("--nt", type=int, default=20)
    d.add_argument("--nx", type=int, default=201)
    return ap


def _report(code, kind, message, **extra) -> int:
    doc = {"error": kind, "message": message, "exit_code": code}
    doc.update(extra)
    print(json.dumps(_finite(doc), sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.verb](args)
    except CommandError as exc:
        return _report(exc.code, exc.kind, str(exc), **exc.extra)
    except ConfigError as exc:
        return _report(EXIT_CONFIG, "ConfigError", str(exc), field=exc.field)
    except RegistryError as exc:
        return _report(EXIT_CONFIG, "RegistryError", str(exc.args[0]))
    except NonconvergenceError as exc:
        return _report(EXIT_SOLVER, "Nonconvergence", str(exc), reason=exc.reason,
                       iterations=exc.result.iterations,
                       endpoint_error=exc.result.endpoint_error)
    except (IntegrationError, BridgeSingularityError) as exc:
        return _report(EXIT_SOLVER, type(exc).__name__, str(exc))
    except (StatisticalPowerError, DivergenceError) as exc:
        return _report(EXIT_STATS, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
