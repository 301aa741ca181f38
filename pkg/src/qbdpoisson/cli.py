"""Command line interface.

JSON in, CSV/JSON out.  Model files carry the four blocks directly
(keys m, B, A_minus1, A0, A1); PH/M/1 inputs use sigma, S, mu and an
optional gamma; rewards use explicit, tail_c0, tail_c1; perturbations
mirror the model keys with a d prefix.  Exit codes: 0 success, 2
validation error, 3 numerical failure.  Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import (
    __version__,
    deviation,
    ergodicity,
    perturb,
    phm1,
    poisson,
    qbd_model,
    rgu,
)
from .errors import (
    DomainError,
    InvalidPerturbation,
    InvalidUniformization,
    NoConvergence,
    NonStochastic,
    NotCentered,
    NotContractive,
    NotPositiveRecurrent,
    SingularStructure,
)

VALIDATION_ERRORS = (DomainError, NonStochastic, NotPositiveRecurrent,
                     NotCentered, InvalidPerturbation, InvalidUniformization)
NUMERICAL_ERRORS = (SingularStructure, NoConvergence, NotContractive)

BUILTIN_DISTS = {
    "mm1": {"sigma": [1.0], "S": [[-1.0]]},
    "e2": {"sigma": [1.0, 0.0], "S": [[-2.0, 2.0], [0.0, -2.0]]},
    "h2": {"sigma": [0.11270167, 0.88729833],
           "S": [[-0.225403332, 0.0], [0.0, -1.77459667]]},
}


def _load_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as exc:
        raise DomainError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path} is not valid JSON: {exc}") from exc


def _require_keys(data, keys, what):
    missing = [k for k in keys if k not in data]
    if missing:
        raise DomainError(f"{what} is missing keys {missing}")


def _model_from_file(path):
    data = _load_json(path)
    _require_keys(data, ("m", "B", "A_minus1", "A0", "A1"), f"model {path}")
    return qbd_model.QbdModel(m=int(data["m"]), B=data["B"],
                              A_minus1=data["A_minus1"], A0=data["A0"],
                              A1=data["A1"])


def _ph_from_args(args, require_mu=True):
    if getattr(args, "dist", None):
        spec = BUILTIN_DISTS[args.dist]
        mu, gamma = None, None
    else:
        spec = _load_json(args.ph)
        _require_keys(spec, ("sigma", "S"), f"PH file {args.ph}")
        mu = spec.get("mu")
        gamma = spec.get("gamma")
    ph = phm1.PhRepresentation(sigma=spec["sigma"], S=spec["S"])
    mu = args.mu if args.mu is not None else mu
    gamma = getattr(args, "gamma", None) if getattr(args, "gamma", None) is not None else gamma
    if mu is None:
        if require_mu:
            raise DomainError("a service rate is required: pass --mu")
        return ph, None, gamma
    return ph, float(mu), gamma


def _model_from_args(args, check=True):
    if getattr(args, "model", None):
        model = _model_from_file(args.model)
    elif getattr(args, "dist", None) or getattr(args, "ph", None):
        ph, mu, gamma = _ph_from_args(args)
        model = phm1.build_qbd(ph, mu, gamma)
    else:
        raise DomainError("no model given: pass --model, or --dist/--ph with --mu")
    if check:
        violations = qbd_model.validate(model)
        if violations:
            raise NonStochastic("; ".join(violations))
    return model


def _reward_from_args(args, m):
    path = getattr(args, "reward", None)
    if not path:
        return poisson.RewardSpec.queue_length(m)
    data = _load_json(path)
    _require_keys(data, ("explicit", "tail_c0", "tail_c1"), f"reward {path}")
    try:
        return poisson.RewardSpec(explicit=data["explicit"],
                                  tail_c0=data["tail_c0"],
                                  tail_c1=data["tail_c1"])
    except ValueError as exc:
        raise DomainError(f"reward {path}: {exc}") from exc


def _perturbation_from_args(args):
    data = _load_json(args.perturbation)
    _require_keys(data, ("dB", "dA_minus1", "dA0", "dA1"),
                  f"perturbation {args.perturbation}")
    return perturb.PerturbationSpec(dB=data["dB"],
                                    dA_minus1=data["dA_minus1"],
                                    dA0=data["dA0"], dA1=data["dA1"])


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_rows(out, header, rows):
    if out in (None, "-"):
        w = csv.writer(sys.stdout)
        w.writerow(header)
        w.writerows([[_fmt(x) for x in row] for row in rows])
    else:
        with open(out, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(header)
            w.writerows([[_fmt(x) for x in row] for row in rows])


def _np_native(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _write_json(out, obj):
    text = json.dumps(obj, indent=2, default=_np_native)
    if out in (None, "-"):
        print(text)
    else:
        with open(out, "w") as f:
            f.write(text + "\n")


def _figure_path(args):
    if not getattr(args, "plot", False):
        return None
    if args.out in (None, "-"):
        raise DomainError("--plot requires --out to derive the figure path")
    return os.path.splitext(args.out)[0] + ".png"


def _solved(args, model):
    algo = {"logred": "log_reduction", "functional": "functional"}[args.algo]
    triple = rgu.solve_triple(model, tol=args.tol, algorithm=algo)
    dist = rgu.stationary(model, triple)
    return triple, dist


def cmd_validate(args):
    model = _model_from_args(args, check=False)
    violations = qbd_model.validate(model)
    for v in violations:
        print(v)
    if violations:
        return 2
    print("ok")
    return 0


def cmd_solve(args):
    model = _model_from_args(args)
    triple, dist = _solved(args, model)
    report = qbd_model.stability(model)
    _write_json(args.out, {
        "pi0": dist.pi0.tolist(),
        "R": triple.R.tolist(),
        "G": triple.G.tolist(),
        "U": triple.U.tolist(),
        "iterations": triple.iterations,
        "residual": triple.residual,
        "drift": report.drift,
    })
    return 0


def cmd_poisson(args):
    model = _model_from_args(args)
    triple, dist = _solved(args, model)
    g = _reward_from_args(args, model.m)
    sol = poisson.solve_poisson(model, triple, dist, g, args.levels,
                                normalization=args.normalization)
    blocks = [sol.h_level(n) for n in range(args.levels + 1)]
    if args.format == "json":
        _write_json(args.out, {
            "omega": sol.omega,
            "normalization": sol.normalization,
            "residual": sol.residual,
            "h": [b.tolist() for b in blocks],
        })
    else:
        rows = [(n, j, blocks[n][j])
                for n in range(len(blocks)) for j in range(model.m)]
        _write_rows(args.out, ["level", "phase", "h_value"], rows)
        print(f"omega = {sol.omega:.12g}", file=sys.stderr)
    fig = _figure_path(args)
    if fig:
        from . import plotting
        plotting.save_poisson_figure(blocks, fig)
        print(f"figure written to {fig}", file=sys.stderr)
    return 0


def cmd_deviation(args):
    model = _model_from_args(args)
    triple, dist = _solved(args, model)
    blocks = deviation.DeviationBlocks(model, triple, dist)
    N = args.levels
    if args.format == "json":
        _write_json(args.out, {
            "window": N,
            "blocks": [{"n": n, "k": k,
                        "block": blocks.d_block(n, k).tolist()}
                       for n in range(N + 1) for k in range(N + 1)],
        })
    else:
        rows = []
        for n in range(N + 1):
            for k in range(N + 1):
                D = blocks.d_block(n, k)
                for i in range(model.m):
                    for j in range(model.m):
                        rows.append((n, k, i, j, D[i, j]))
        _write_rows(args.out, ["n", "k", "i", "j", "value"], rows)
    return 0


def cmd_drift(args):
    model = _model_from_args(args)
    cert = ergodicity.certificate(model, tol=args.tol)
    report = ergodicity.verify_drift(model, cert, args.levels)
    payload = {
        "z0": cert.z0,
        "lambda0": cert.lambda0,
        "b": cert.b,
        "u": cert.u.tolist(),
        "verified_levels": report.levels,
        "passed": report.passed,
        "boundary_excess": report.boundary_excess,
        "interior_residual": report.interior_residual,
    }
    _write_json(args.out, payload)
    if not report.passed:
        print("drift verification failed", file=sys.stderr)
        return 3
    return 0


def cmd_perturb(args):
    model = _model_from_args(args)
    triple, dist = _solved(args, model)
    Q = _perturbation_from_args(args)
    g = _reward_from_args(args, model.m)
    cert = ergodicity.certificate(model)
    admissible = perturb.admissible_delta(model, cert, Q)
    payload = {
        "order": args.order,
        "admissible_delta": admissible if np.isfinite(admissible) else "unbounded",
    }
    if args.order == 1:
        payload["derivative"] = perturb.omega_derivative_1(
            model, triple, dist, Q, g)
    else:
        payload["derivative"] = perturb.derivative_series(
            model, triple, dist, Q, g, order=args.order)
    if args.fd_check:
        chk = perturb.fd_check(model, Q, g, delta=args.delta,
                               order=min(args.order, 2))
        payload["fd_estimate"] = chk.fd_estimate
        payload["fd_rel_err"] = chk.rel_err
    _write_json(args.out, payload)
    return 0


def cmd_phm1(args):
    ph, mu, gamma = _ph_from_args(args)
    model = phm1.build_qbd(ph, mu, gamma)
    triple = rgu.solve_triple(model)
    dist = rgu.stationary(model, triple)
    if args.metric == "L":
        print(f"{phm1.queue_length(dist):.6f}")
    return 0


def cmd_sensitivity(args):
    ph, mu, gamma = _ph_from_args(args)
    result = phm1.sensitivity(ph, mu, N=args.levels, gamma=gamma)
    blocks = result.m_blocks
    if args.format == "json":
        _write_json(args.out, {
            "L": result.L,
            "c0": result.c0,
            "m": [b.tolist() for b in blocks],
        })
    else:
        rows = [(n, j, blocks[n][j])
                for n in range(len(blocks)) for j in range(len(blocks[0]))]
        _write_rows(args.out, ["level", "phase", "m_value"], rows)
        print(f"L = {result.L:.12g}, c0 = {result.c0:.12g}", file=sys.stderr)
    fig = _figure_path(args)
    if fig:
        from . import plotting
        plotting.save_sensitivity_figure(blocks, fig, L=result.L)
        print(f"figure written to {fig}", file=sys.stderr)
    return 0


def cmd_sweep(args):
    ph, _, _ = _ph_from_args(args, require_mu=False)
    if args.mus:
        mus = [float(x) for x in args.mus.split(",")]
    else:
        lam = 1.0 / ph.mean_interarrival()
        rhos = np.linspace(args.rho_min, args.rho_max, args.points)
        mus = [lam / rho for rho in rhos]
    rows = phm1.sweep_rho(ph, mus)
    for r in rows:
        if r.error:
            print(f"rho = {r.rho:.6g}: {r.error}", file=sys.stderr)
    table = [(r.rho, r.L) for r in rows if r.error is None]
    if args.format == "json":
        _write_json(args.out, [{"rho": rho, "L": L} for rho, L in table])
    else:
        _write_rows(args.out, ["rho", "L"], table)
    fig = _figure_path(args)
    if fig:
        from . import plotting
        plotting.save_sweep_figure(rows, fig)
        print(f"figure written to {fig}", file=sys.stderr)
    return 0


def cmd_export(args):
    model = _model_from_args(args)
    _write_json(args.out, {
        "m": model.m,
        "B": model.B.tolist(),
        "A_minus1": model.A_minus1.tolist(),
        "A0": model.A0.tolist(),
        "A1": model.A1.tolist(),
    })
    return 0


def _levels_arg(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"levels must be >= 1, got {value}")
    return value


def _tol_arg(text):
    value = float(text)
    if not 0.0 < value <= 1e-3:
        raise argparse.ArgumentTypeError(
            f"tol must lie in (0, 1e-3], got {value}")
    return value


def _add_model_source(p):
    p.add_argument("--model", help="QBD model JSON file")
    p.add_argument("--dist", choices=sorted(BUILTIN_DISTS),
                   help="built-in PH inter-arrival law")
    p.add_argument("--ph", help="PH representation JSON file")
    p.add_argument("--mu", type=float, help="service rate for PH inputs")
    p.add_argument("--gamma", type=float,
                   help="uniformization rate override for PH inputs")


def _add_levels(p, default):
    shown = "auto" if default is None else default
    p.add_argument("--levels", type=_levels_arg, default=default,
                   help=f"number of levels (default {shown})")


def _add_common(p):
    p.add_argument("--tol", type=_tol_arg, default=1e-12)
    p.add_argument("--out", default="-", help="output path ('-' = stdout)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--algo", choices=["logred", "functional"],
                   default="logred")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qbd",
        description="Poisson's equation, deviation matrices, drift "
                    "certificates and sensitivity analysis for QBD chains")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check model invariants")
    _add_model_source(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="G, U, R and the stationary law (JSON)")
    _add_model_source(p)
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("poisson", help="solve (I-P)h = g - omega 1")
    _add_model_source(p)
    _add_common(p)
    _add_levels(p, 20)
    p.add_argument("--reward", help="reward JSON (default: g_n = n 1)")
    p.add_argument("--normalization", choices=["pi", "anchor"], default="pi")
    p.add_argument("--plot", action="store_true",
                   help="render h traces to <out>.png")
    p.set_defaults(func=cmd_poisson)

    p = sub.add_parser("deviation", help="deviation matrix blocks")
    _add_model_source(p)
    _add_common(p)
    _add_levels(p, 5)
    p.set_defaults(func=cmd_deviation)

    p = sub.add_parser("drift", help="geometric drift certificate")
    _add_model_source(p)
    _add_common(p)
    _add_levels(p, 50)
    p.set_defaults(func=cmd_drift)

    p = sub.add_parser("perturb", help="stationary reward derivatives")
    _add_model_source(p)
    _add_common(p)
    p.add_argument("--perturbation", required=True,
                   help="perturbation JSON (dB, dA_minus1, dA0, dA1)")
    p.add_argument("--reward", help="reward JSON (default: g_n = n 1)")
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--delta", type=float, default=1e-5,
                   help="step for the finite-difference check")
    p.add_argument("--fd-check", action="store_true",
                   help="validate against a central finite difference")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("phm1", help="PH/M/1 queue metrics")
    _add_model_source(p)
    p.add_argument("--metric", choices=["L"], default="L")
    p.set_defaults(func=cmd_phm1)

    p = sub.add_parser("sensitivity", help="queue length sensitivity vector")
    _add_model_source(p)
    _add_common(p)
    _add_levels(p, None)
    p.add_argument("--plot", action="store_true",
                   help="render m traces to <out>.png")
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("sweep", help="L as a function of rho")
    _add_model_source(p)
    _add_common(p)
    p.add_argument("--mus", help="comma-separated service rates")
    p.add_argument("--rho-min", type=float, default=0.1)
    p.add_argument("--rho-max", type=float, default=0.9)
    p.add_argument("--points", type=int, default=10)
    p.add_argument("--plot", action="store_true",
                   help="render the L(rho) curve to <out>.png")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export", help="re-emit the model as canonical JSON")
    _add_model_source(p)
    _add_common(p)
    p.set_defaults(func=cmd_export)

    return parser


def run(argv=None) -> int:
    """Parse argv, dispatch, and map errors to exit codes 2 and 3."""
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main():
    sys.exit(run())
