"""
Command-line front end.

Subcommands: solve, verify, manufacture, spectrum, isotropic, sweep.
Exit codes: 0 success, 1 compute failure (partial outputs are still
written), 2 config or usage error.  The env var CMK_THREADS caps BLAS
parallelism when set.
"""

import argparse
import itertools
import json
import os
import sys

import numpy as np

from . import diagnostics as diag
from .config import build_h_star, build_problem, ensure_out_dir, parse_config
from .continuation import continue_path
from .errors import AdmissibilityError, ConfigError, DomainError, SingularJacobianError
from .geometry import reconstruct_body, write_obj, write_polyline
from .problem import residual
from .sphere import build_grid, read_grid_function, write_grid_function


def _apply_thread_cap():
    cap = os.environ.get("CMK_THREADS")
    if not cap:
        return
    try:
        limit = int(cap)
    except ValueError:
        print(f"warning: ignoring non-integer CMK_THREADS={cap!r}", file=sys.stderr)
        return
    try:
        import threadpoolctl
        threadpoolctl.threadpool_limits(limit)
    except ImportError:
        # best effort for libraries loaded later
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(limit))


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _diagnostics_payload(spec, h):
    try:
        return diag.run_diagnostics(spec, h).to_dict()
    except (AdmissibilityError, DomainError) as exc:
        return {"error": str(exc)}


def _solve_report(cfg, spec, trace):
    rep = residual(spec, trace.h, 1.0)
    payload = {
        "problem": {"n": spec.n, "k": spec.k, "p": spec.p, "q": spec.q,
                    "grid": list(spec.grid.shape), "binom_nk": spec.binom_nk},
        "warnings": list(spec.warnings),
        "success": trace.success,
        "message": trace.message,
        "steps": max(len(trace.steps) - 1, 0),
        "wall_time": trace.wall_time,
        "residual": {"linf": rep.linf, "l2": rep.l2},
        "f1": trace.f1_report,
        "diagnostics": _diagnostics_payload(spec, trace.h),
    }
    return payload


def _cmd_solve(cfg):
    grid, spec = build_problem(cfg)
    trace = continue_path(spec)
    out = ensure_out_dir(cfg)
    write_grid_function(trace.h, os.path.join(out, "solution.csv"))
    trace.to_jsonl(os.path.join(out, "trace.jsonl"))
    payload = _solve_report(cfg, spec, trace)
    _write_json(os.path.join(out, "report.json"), payload)
    if cfg.out_mesh:
        mesh = reconstruct_body(trace.h)
        if cfg.n == 2:
            write_obj(mesh, os.path.join(out, "mesh.obj"))
        else:
            write_polyline(mesh, os.path.join(out, "body.csv"))
    print(json.dumps({"success": trace.success,
                      "residual_linf": payload["residual"]["linf"],
                      "steps": payload["steps"]}))
    return 0 if trace.success else 1


def _cmd_verify(cfg, solution_path):
    grid, spec = build_problem(cfg)
    try:
        h = read_grid_function(grid, solution_path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read solution '{solution_path}': {exc}") from exc
    rep = residual(spec, h, 1.0)
    payload = {
        "solution": solution_path,
        "residual": {"linf": rep.linf, "l2": rep.l2},
        "tol_newton": spec.tol_newton,
        "passes": rep.linf <= spec.tol_newton,
        "warnings": list(spec.warnings),
        "diagnostics": _diagnostics_payload(spec, h),
    }
    out = ensure_out_dir(cfg)
    _write_json(os.path.join(out, "verify.json"), payload)
    print(json.dumps(payload))
    return 0 if payload["passes"] else 1


def _cmd_manufacture(cfg):
    grid = build_grid(cfg.n, **cfg.grid_args())
    h_star = build_h_star(cfg, grid)
    f = diag.manufacture(h_star, cfg.k, cfg.p, cfg.q)
    out = ensure_out_dir(cfg)
    write_grid_function(f, os.path.join(out, "f.csv"))
    write_grid_function(h_star, os.path.join(out, "h_star.csv"))
    print(json.dumps({"f_min": float(np.min(f.values)),
                      "f_max": float(np.max(f.values)),
                      "out": out}))
    return 0


def _cmd_spectrum(cfg):
    grid, spec = build_problem(cfg)
    eigs = diag.l0_spectrum(spec)
    out = ensure_out_dir(cfg)
    with open(os.path.join(out, "spectrum.csv"), "w") as fh:
        fh.write("eigenvalue\n")
        for ev in eigs:
            fh.write(f"{ev:.17g}\n")
    payload = {
        "top": float(eigs[0]),
        "top_analytic": diag.l0_top_eigenvalue_analytic(spec),
        "positive_count": int(np.sum(eigs > 0)),
    }
    print(json.dumps(payload))
    return 0


def _cmd_isotropic(cfg):
    if cfg.f_kind != "constant" or cfg.f_value != 1.0:
        raise ConfigError(f"{cfg.path}: isotropic runs need f.kind = constant "
                          f"and f.value = 1")
    grid, spec = build_problem(cfg)
    result = diag.isotropic_experiment(
        spec, restarts=cfg.isotropic_restarts, seed=cfg.seed,
        amplitude=cfg.isotropic_amplitude)
    out = ensure_out_dir(cfg)
    payload = {k: v for k, v in result.items() if k != "h_final" and k != "trace"}
    _write_json(os.path.join(out, "isotropic.json"), payload)
    write_grid_function(result["h_final"], os.path.join(out, "solution.csv"))
    print(json.dumps(payload))
    ok = result["trace"].success and all(
        e <= 1e-6 for e in result["restart_errors"])
    return 0 if ok else 1


def _cmd_sweep(cfg):
    if not cfg.sweep_p or not cfg.sweep_q:
        raise ConfigError(f"{cfg.path}: sweep needs sweep.p and sweep.q lists")
    out = ensure_out_dir(cfg)
    all_ok = True
    path = os.path.join(out, "sweep.jsonl")
    with open(path, "w") as fh:
        for p, q in itertools.product(cfg.sweep_p, cfg.sweep_q):
            point = dict(p=p, q=q)
            try:
                grid, spec = _point_problem(cfg, p, q)
                trace = continue_path(spec)
                last = trace.steps[-1] if trace.steps else {}
                point.update(success=trace.success,
                             steps=max(len(trace.steps) - 1, 0),
                             residual=last.get("residual"),
                             R=last.get("R"), r=last.get("r"),
                             ratio=last.get("ratio"),
                             min_b_eig=last.get("min_b_eig"),
                             wall_time=trace.wall_time,
                             message=trace.message)
                all_ok = all_ok and trace.success
            except (ConfigError, DomainError, AdmissibilityError,
                    SingularJacobianError) as exc:
                point.update(success=False, message=str(exc))
                all_ok = False
            fh.write(json.dumps(point) + "\n")
            fh.flush()
    print(json.dumps({"out": path, "all_converged": all_ok}))
    return 0 if all_ok else 1


def _point_problem(cfg, p, q):
    import dataclasses
    return build_problem(dataclasses.replace(cfg, p=p, q=q))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cmkit",
        description="Curvature-measure solver for convex bodies: homotopy "
                    "continuation for sigma_k support-function equations on "
                    "the circle and the 2-sphere.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("solve", "run homotopy continuation and write solution, trace, report"),
            ("verify", "recompute the residual of a stored solution"),
            ("manufacture", "build data f whose exact solution is a chosen h"),
            ("spectrum", "eigenvalues of the even-subspace linearization at h = 1"),
            ("isotropic", "f = 1 uniqueness experiment with perturbed restarts"),
            ("sweep", "continuation over a grid of (p, q) exponents")):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("config", help="path to a key = value config file")
        if name == "verify":
            cmd.add_argument("--solution", required=True,
                             help="solution CSV to verify against the config")
    return parser


def main(argv=None):
    _apply_thread_cap()
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "solve":
            return _cmd_solve(cfg)
        if args.command == "verify":
            return _cmd_verify(cfg, args.solution)
        if args.command == "manufacture":
            return _cmd_manufacture(cfg)
        if args.command == "spectrum":
            return _cmd_spectrum(cfg)
        if args.command == "isotropic":
            return _cmd_isotropic(cfg)
        if args.command == "sweep":
            return _cmd_sweep(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, AdmissibilityError, SingularJacobianError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
