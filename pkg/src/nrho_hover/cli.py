"""Command-line front end.

Every verb writes its data files plus ``run_manifest.json`` into the output
directory (``--out``, else ``$NRHO_HOVER_OUTDIR``, else the current
directory).  Exit status: 0 success, 1 numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .analysis import DESIGNED, RESET, compare_models, dv_vs_rho
from .continuation import ContinuationConfig, Family, continue_family
from .design import (
    RevisitSpec,
    TeardropSolution,
    correct_teardrop,
    linear_velocity_guess,
    min_impulse,
    sweep_grid,
)
from .errors import HoverError
from .orbit import PeriodicOrbit, monodromy, refine_nrho, spectrum, nominal_nrho, unit_eigenvector
from .propagation import Tolerances, propagate
from .relative import nonlinear_relative

log = logging.getLogger("nrho_hover")

OUTDIR_ENV = "NRHO_HOVER_OUTDIR"
EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2

VERBS = ("refine-orbit", "monodromy", "design", "sweep", "continue", "drift", "dv-table")

_PI_EXPR = re.compile(r"^\s*([-+]?\d*\.?\d*)\s*\*?\s*(?:pi|π)\s*(?:/\s*(\d*\.?\d+))?\s*$")


class UsageError(Exception):
    pass


def angle(text: str) -> float:
    """Float, or a multiple of pi such as ``pi/2``, ``3pi/2``, ``3*pi/2``."""
    try:
        return float(text)
    except ValueError:
        pass
    m = _PI_EXPR.match(text)
    if not m:
        raise argparse.ArgumentTypeError(f"malformed angle {text!r}")
    coef = m.group(1)
    num = float(coef) if coef not in ("", "+", "-") else (-1.0 if coef == "-" else 1.0)
    den = float(m.group(2)) if m.group(2) else 1.0
    return num * math.pi / den


def positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed number {text!r}") from None
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed integer {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


@dataclass
class Command:
    verb: str
    options: dict
    io: dict = field(default_factory=dict)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--out", type=Path, help=f"output directory (default ${OUTDIR_ENV} or .)")
    p.add_argument("--config", type=Path, help="JSON file supplying any flag; CLI flags win")
    p.add_argument("--tol", type=positive_float, default=1e-13, help="integration abs/rel tolerance")
    p.add_argument("--orbit-file", type=Path, help="refined orbit JSON (default: refine the built-in 9:2 NRHO)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def _angles(p, required: bool, default_alpha=None, default_beta=None):
    p.add_argument("--alpha", type=angle, required=required, default=default_alpha,
                   help="polar angle from +z (rad, or e.g. pi/2)")
    p.add_argument("--beta", type=angle, required=required, default=default_beta,
                   help="azimuth from +x (rad, or e.g. 3pi/2)")
    p.add_argument("--degrees", action="store_true", help="angles are given in degrees")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nrho-hover", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", metavar="VERB", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("refine-orbit", help="refine the 9:2 NRHO initial state")
    _common(p)
    p.add_argument("--samples", type=int, default=400, help="trajectory samples per period")

    p = sub.add_parser("monodromy", help="monodromy matrix and its spectrum")
    _common(p)

    p = sub.add_parser("design", help="design one teardrop formation")
    _common(p)
    p.add_argument("--rho-km", type=positive_float, required=True, help="revisit distance (km)")
    _angles(p, required=True)
    p.add_argument("--samples", type=int, default=400, help="relative trajectory samples")

    p = sub.add_parser("sweep", help="impulse map over an (alpha, beta) grid")
    _common(p)
    p.add_argument("--rho-km", type=positive_float, required=True, help="revisit distance (km)")
    p.add_argument("--alpha-step", type=angle, required=True, help="polar grid step, e.g. pi/10")
    p.add_argument("--beta-step", type=angle, required=True, help="azimuth grid step, e.g. pi/10")
    p.add_argument("--degrees", action="store_true", help="steps are given in degrees")
    p.add_argument("--parallel", type=positive_int, default=1, help="worker processes")

    p = sub.add_parser("continue", help="continue a design in revisit distance")
    _common(p)
    p.add_argument("--seed-file", type=Path, required=True, help="solution.json written by `design`")
    p.add_argument("--target-rho-km", type=positive_float, required=True, help="final revisit distance (km)")
    p.add_argument("--delta-rho-km", type=positive_float, default=0.1, help="step in revisit distance (km, default 0.1)")
    p.add_argument("--max-steps", type=positive_int, default=499, help="step budget (default 499)")
    p.add_argument("--eps-tol", type=positive_float, default=1e-9, help="largest accepted |psi| (LU, default 1e-9)")
    p.add_argument("--retry-halving", action="store_true", help="halve the step instead of stopping when a member fails")

    p = sub.add_parser("drift", help="multi-period drift, linear vs nonlinear design")
    _common(p)
    p.add_argument("--rho-km", type=positive_float, default=1.0, help="revisit distance (km, default 1)")
    _angles(p, required=False, default_alpha=math.pi / 2, default_beta=3 * math.pi / 2)
    p.add_argument("--periods", type=positive_int, default=10, help="number of revisit periods (default 10)")
    p.add_argument("--law", choices=(DESIGNED, RESET), default=DESIGNED,
                   help="impulse applied at each revisit")
    p.add_argument("--samples", type=int, default=100, help="trajectory samples per period")

    p = sub.add_parser("dv-table", help="Delta-v versus revisit distance for a family")
    _common(p)
    p.add_argument("--family-file", type=Path, required=True, help="family.json written by `continue`")
    return parser


def parse(args: list[str]) -> Command:
    """Parse argv into a validated :class:`Command` (exit 2 on usage errors).

    A ``--config`` JSON file may supply any option of the verb, using either
    flag spelling (``rho-km``) or attribute spelling (``rho_km``).
    """
    parser = build_parser()
    # the config file is read before the real parse so that it can satisfy
    # required flags
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    config = pre.parse_known_args(args)[0].config
    verb = next((a for a in args if a in VERBS), None)
    if config is not None and verb is not None:
        try:
            cfg = io.read_json(config)
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read config {config}: {exc}")
        if not isinstance(cfg, dict):
            parser.error("config file must hold a JSON object")
        sub = parser._subparsers._group_actions[0].choices[verb]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, value in cfg.items():
            dest = key.lstrip("-").replace("-", "_")
            if dest not in known or dest in ("help", "config"):
                sub.error(f"unknown option {key!r} in config file")
            action = known[dest]
            if action.type is not None and isinstance(value, str):
                try:
                    value = action.type(value)
                except (argparse.ArgumentTypeError, ValueError) as exc:
                    sub.error(f"bad value for {key!r} in config file: {exc}")
            defaults[dest] = value
        sub.set_defaults(**defaults)
        for dest in defaults:
            known[dest].required = False
    ns = parser.parse_args(args)

    opts = vars(ns).copy()
    verb = opts.pop("verb")
    if opts.pop("degrees", False):
        for k in ("alpha", "beta", "alpha_step", "beta_step"):
            if opts.get(k) is not None:
                opts[k] = math.radians(opts[k])
    out = opts.pop("out") or Path(os.environ.get(OUTDIR_ENV, "."))
    paths = {k: opts[k] for k in ("config", "orbit_file", "seed_file", "family_file") if opts.get(k)}
    return Command(verb, opts, {"out": Path(out), "inputs": paths})


# ---------------------------------------------------------------- execution


def _tol(opts) -> Tolerances:
    return Tolerances(opts["tol"], opts["tol"])


def _orbit(opts, tol) -> PeriodicOrbit:
    path = opts.get("orbit_file")
    if path is None:
        return refine_nrho(nominal_nrho(), tol)
    orbit = PeriodicOrbit.from_dict(io.read_json(path))
    if not orbit.refined:
        orbit = refine_nrho(orbit, tol)
    return orbit


def _run_refine(cmd, out, tol):
    guess = nominal_nrho()
    orbit = _orbit(cmd.options, tol)
    data = orbit.to_dict()
    data["iterations"] = orbit.iterations
    data["correction_norm"] = float(np.linalg.norm(orbit.initial_state - guess.initial_state))
    files = [io.write_json(out / "orbit.json", data)]
    traj = propagate(orbit.initial_state, 0.0, orbit.period, tol, max(cmd.options["samples"], 0))
    files.append(io.write_trajectory(
        out / "orbit_trajectory.csv", traj.epochs, traj.states, ["x", "y", "z", "u", "v", "w"],
        {"orbit": orbit.to_dict(), "tolerances": tol.as_dict()},
    ))
    files.append(out / "orbit_trajectory.json")
    return files, EXIT_OK, {"iterations": orbit.iterations}


def _run_monodromy(cmd, out, tol):
    orbit = _orbit(cmd.options, tol)
    m = monodromy(orbit, tol)
    spec = spectrum(m)
    data = {
        "orbit": orbit.to_dict(),
        "monodromy": m,
        "determinant": float(np.linalg.det(m)),
        "spectrum": spec.to_dict(),
        "unit_eigenvector": unit_eigenvector(m),
    }
    return [io.write_json(out / "monodromy.json", data)], EXIT_OK, {}


def _spec(opts) -> RevisitSpec:
    return RevisitSpec(opts["rho_km"], opts["alpha"], opts["beta"])


def _run_design(cmd, out, tol):
    orbit = _orbit(cmd.options, tol)
    spec = _spec(cmd.options)
    m = monodromy(orbit, tol)
    guess = linear_velocity_guess(spec.position, m)
    sol = correct_teardrop(spec, guess, orbit, tol)
    data = sol.to_dict()
    data["linear_guess_dv0"] = guess
    data["orbit"] = orbit.to_dict()
    files = [io.write_json(out / "solution.json", data)]
    n = max(cmd.options["samples"], 0)
    _, rel = nonlinear_relative(orbit.initial_state, sol.relative_state, orbit.period, tol, n)
    files.append(io.write_trajectory(
        out / "relative_trajectory.csv", rel.epochs, rel.states,
        ["dx", "dy", "dz", "du", "dv", "dw"],
        {"chief_orbit": orbit.to_dict(), "tolerances": tol.as_dict(), "solution": "solution.json"},
    ))
    files.append(out / "relative_trajectory.json")
    status = EXIT_OK if sol.converged else EXIT_NUMERIC
    if not sol.converged:
        print(f"design did not converge: |psi| = {sol.residual.norm:.3e}", file=sys.stderr)
    return files, status, {"converged": sol.converged}


def _run_sweep(cmd, out, tol):
    o = cmd.options
    orbit = _orbit(o, tol)
    res = sweep_grid(o["rho_km"], o["alpha_step"], o["beta_step"], orbit, tol, o["parallel"])
    files = [io.write_csv(
        out / "sweep.csv",
        ["alpha", "beta", "dv_mps", "converged", "iterations", "residual_norm"],
        res.rows(),
    )]
    summary = {
        "rho_km": o["rho_km"],
        "n_alpha": len(res.alpha_grid),
        "n_beta": len(res.beta_grid),
        "n_cells": res.n_cells,
        "n_converged": len(res.solutions),
        "failures": [{"i": i, "j": j, **r} for (i, j), r in sorted(res.failures.items())],
    }
    status = EXIT_OK
    try:
        a, b, sol = min_impulse(res)
        summary["minimum"] = {"alpha": a, "beta": b, "solution": sol.to_dict()}
    except ValueError:
        print("sweep: no converged cells", file=sys.stderr)
        status = EXIT_NUMERIC
    files.append(io.write_json(out / "sweep_summary.json", summary))
    return files, status, {"n_converged": len(res.solutions), "n_cells": res.n_cells}


def family_to_dict(fam: Family) -> dict:
    return {
        "config": fam.config.to_dict(),
        "termination_reason": fam.termination_reason,
        "rank_deficient_steps": fam.rank_deficient_steps,
        "members": [
            {"rho_km": float(r), **m.to_dict()} for r, m in zip(fam.rho_labels, fam.members)
        ],
    }


def family_from_dict(d: dict) -> Family:
    from decimal import Decimal

    cfg = d.get("config", {})
    config = ContinuationConfig(
        cfg.get("delta_rho_km", 0.1), cfg.get("max_steps", 499), cfg.get("eps_tol", 1e-9),
        cfg.get("retry_halving", False),
    )
    members = [TeardropSolution.from_dict(m) for m in d["members"]]
    labels = [Decimal(str(m["rho_km"])) for m in d["members"]]
    return Family(members, config, d.get("termination_reason", ""), labels)


def _run_continue(cmd, out, tol):
    o = cmd.options
    orbit = _orbit(o, tol)
    seed_data = io.read_json(o["seed_file"])
    seed = TeardropSolution.from_dict(seed_data)
    config = ContinuationConfig(o["delta_rho_km"], o["max_steps"], o["eps_tol"], o["retry_halving"])
    fam = continue_family(seed, o["target_rho_km"], config, orbit, tol)
    rows = (
        (float(r), m.dv_mps, *m.impulse_vec, m.residual.norm, m.iterations)
        for r, m in zip(fam.rho_labels, fam.members)
    )
    files = [io.write_csv(
        out / "family.csv",
        ["rho_km", "dv_mps", "dv_x", "dv_y", "dv_z", "residual_norm", "iterations"],
        rows,
    )]
    files.append(io.write_json(out / "family.json", family_to_dict(fam)))
    for r, m in zip(fam.rho_labels, fam.members):
        files.append(io.write_json(out / "members" / f"rho_{r:.4f}km.json", {"rho_km": float(r), **m.to_dict()}))
    reached = fam.rho_labels[-1] >= type(fam.rho_labels[-1])(str(o["target_rho_km"]))
    print(f"continuation: {len(fam.members) - 1} steps, reason {fam.termination_reason}", file=sys.stderr)
    return files, EXIT_OK if reached else EXIT_NUMERIC, {"termination_reason": fam.termination_reason}


def _run_drift(cmd, out, tol):
    o = cmd.options
    orbit = _orbit(o, tol)
    spec = _spec(o)
    rep = compare_models(spec, o["periods"], orbit, tol, max(o["samples"], 0), o["law"])
    files = [io.write_csv(
        out / "drift.csv",
        ["period_index", "t_j", "drift_km_linear", "drift_km_nonlinear", "dv_mps_linear", "dv_mps_nonlinear"],
        rep.rows(),
    )]
    files.append(io.write_json(out / "drift_summary.json", {"spec": spec.to_dict(), **rep.summary}))
    km = io.EARTH_MOON.LU
    long_rows = (
        (rec.design_model, t, *(dr * km))
        for rec in (rep.linear, rep.nonlinear)
        for t, dr in rec.samples
    )
    files.append(io.write_csv(out / "drift_long.csv", ["model", "t", "dx_km", "dy_km", "dz_km"], long_rows))
    ok = rep.linear.complete and rep.nonlinear.complete
    return files, EXIT_OK if ok else EXIT_NUMERIC, {}


def _run_dv_table(cmd, out, tol):
    o = cmd.options
    orbit = _orbit(o, tol)
    fam = family_from_dict(io.read_json(o["family_file"]))
    rows = dv_vs_rho(fam, orbit, tol)
    header = ["rho_km", "dv_mps", "dv_linear_mps", "deviation_mps", "anchored_rel_deviation"]
    return [io.write_csv(out / "dv_table.csv", header, ([r[k] for k in header] for r in rows))], EXIT_OK, {}


_RUNNERS = {
    "refine-orbit": _run_refine,
    "monodromy": _run_monodromy,
    "design": _run_design,
    "sweep": _run_sweep,
    "continue": _run_continue,
    "drift": _run_drift,
    "dv-table": _run_dv_table,
}


def execute(cmd: Command) -> int:
    """Run a parsed command; always writes ``run_manifest.json``."""
    out = cmd.io["out"]
    out.mkdir(parents=True, exist_ok=True)
    tol = _tol(cmd.options)
    t0 = time.perf_counter()
    files, status, extra, message = [], EXIT_NUMERIC, {}, None
    try:
        files, status, extra = _RUNNERS[cmd.verb](cmd, out, tol)
    except HoverError as exc:
        message = f"{type(exc).__name__}: {exc}"
        print(f"nrho-hover {cmd.verb}: numerical failure: {message}", file=sys.stderr)
        status = EXIT_NUMERIC
    except (ValueError, OSError, KeyError) as exc:
        message = f"{type(exc).__name__}: {exc}"
        print(f"nrho-hover {cmd.verb}: error: {message}", file=sys.stderr)
        status = EXIT_USAGE
    names = [Path(f).relative_to(out) if Path(f).is_absolute() == out.is_absolute() else f for f in files]
    state = {EXIT_OK: "success", EXIT_NUMERIC: "numerical-failure", EXIT_USAGE: "usage-error"}[status]
    if message:
        extra = {**extra, "error": message}
    io.write_json(
        out / "run_manifest.json",
        io.manifest(cmd.verb, tol, cmd.io["inputs"], names, state, time.perf_counter() - t0,
                    {"options": {k: v for k, v in cmd.options.items() if k != "verbose"}, **extra}),
    )
    return status


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cmd = parse(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if cmd.options.get("verbose") else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return execute(cmd)


if __name__ == "__main__":
    raise SystemExit(main())
