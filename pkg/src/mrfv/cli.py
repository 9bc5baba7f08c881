"""Command line interface.

Subcommands: ``run`` (single case), ``study`` (convergence sweep), ``sp3``
(photoionization demo), ``export-matrix`` (assemble and write the system).
Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import assembly, harness, mra, sp3
from .errors import ConfigError, SolverError
from .forest import Forest

log = logging.getLogger(__name__)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mrfv",
        description="Adaptive multiresolution finite-volume elliptic solver")
    ap.add_argument("--verbose", "-v", action="count", default=0,
                    help="increase log verbosity (repeatable)")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, desc in (("run", "solve one configured case and export fields"),
                       ("study", "run the convergence/complexity sweep"),
                       ("sp3", "run the photoionization demo"),
                       ("export-matrix", "assemble and write Matrix Market")):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", metavar="PATH",
                       help="TOML config file (defaults apply when omitted)")
        p.add_argument("--max-level", type=int, metavar="J",
                       help="override finest level")
        p.add_argument("--eta", type=float, metavar="ETA",
                       help="override multiresolution threshold")
        p.add_argument("--tol", type=float, metavar="TOL",
                       help="override solver relative tolerance")
        p.add_argument("--solver", choices=("bicgstab", "cg", "direct"),
                       help="override solver method")
        p.add_argument("--out", metavar="DIR", help="override output directory")
        p.add_argument("--threads", type=int, metavar="N",
                       help="worker cap; 1 (the default) is deterministic")
    return ap


def _resolve(args: argparse.Namespace) -> harness.RunConfig:
    default_case = "sp3demo" if args.command == "sp3" else None
    cfg = harness.load_config(args.config, default_case=default_case)
    updates: dict = {}
    if args.max_level is not None:
        if args.max_level < 0:
            raise ConfigError("--max-level must be nonnegative")
        updates["max_level"] = args.max_level
    if args.eta is not None:
        if args.eta < 0:
            raise ConfigError("--eta must be nonnegative")
        updates["eta"] = args.eta
    if args.tol is not None:
        if args.tol <= 0:
            raise ConfigError("--tol must be positive")
        updates["rel_tol"] = args.tol
    if args.solver is not None:
        updates["solver_method"] = args.solver
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        updates["threads"] = args.threads
    if updates:
        import dataclasses
        cfg = dataclasses.replace(cfg, **updates)
    return cfg


def _ensure_out(cfg: harness.RunConfig) -> str:
    try:
        os.makedirs(cfg.out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {cfg.out_dir}: {exc}") \
            from exc
    return cfg.out_dir


def _cmd_run(cfg: harness.RunConfig) -> None:
    out = _ensure_out(cfg)
    if cfg.case == "sp3demo":
        _cmd_sp3(cfg)
        return
    res = harness.run_gaussian_case(cfg, keep_fields=True)
    pts = np.array([res.forest.grid.center(c)
                    for c in res.forest.enumerate_leaves().cells])
    p = cfg.gaussian
    phi_exact = harness.exact_solution(pts, p)
    e_num = -assembly.gradient(res.forest, res.phi, harness.case_bc(cfg))
    cols = {"phi": res.phi, "phi_exact": phi_exact,
            "err": res.phi - phi_exact,
            "source": harness.exact_source(pts, p, cfg.dims)}
    for i in range(cfg.dims):
        cols[f"e{i}"] = e_num[:, i]
    path = os.path.join(out, "fields.csv")
    harness.export_field_csv(path, res.forest, cols)
    print(f"case={cfg.case} J={res.max_level} eta={res.eta:g} "
          f"N_L={res.n_leaves} ({res.compression_pct:.2f}% of uniform) "
          f"err_phi={res.err_phi:.6e} solver={res.solver_method} "
          f"iters={res.iterations}")
    print(f"wrote {path}")


def _cmd_study(cfg: harness.RunConfig) -> None:
    out = _ensure_out(cfg)
    report = harness.run_convergence_study(cfg)
    study = os.path.join(out, "study.csv")
    timings = os.path.join(out, "study_timings.csv")
    harness.export_study_csv(study, report, timings)
    for eta in cfg.study_etas:
        try:
            slope = report.observed_order_phi(eta)
            print(f"eta={eta:g}: observed phi order {slope:.3f}")
        except ValueError:
            pass
    if report.assembly_slope is not None:
        print(f"assembly time vs N_L log-log slope: {report.assembly_slope:.3f}")
    print(f"wrote {study} and {timings}")


def _cmd_sp3(cfg: harness.RunConfig) -> None:
    out = _ensure_out(cfg)
    demo = harness.run_sp3_demo(cfg)
    fields = os.path.join(out, "sp3_fields.csv")
    rep = os.path.join(out, "sp3_report.csv")
    harness.export_sp3_csv(fields, rep, demo)
    mn = float(demo.result.rate.min())
    for l, grp in enumerate(demo.result.groups):
        print(f"group {l + 1}: coupling iterations {grp.coupling_iterations}, "
              f"final update {grp.coupling_updates[-1]:.3e}")
    if mn < 0:
        print(f"note: photoionization rate dips to {mn:.3e} "
              "(discretization undershoot)")
    print(f"wrote {fields} and {rep}")


def _cmd_export_matrix(cfg: harness.RunConfig) -> None:
    out = _ensure_out(cfg)
    if cfg.case == "sp3demo":
        d = cfg.sp3
        physics = sp3.PhysicalParams(
            p_o2=d.p_o2, p_total=d.p_total, p_quench=d.p_quench,
            efficiency=d.efficiency, light_speed=d.light_speed,
            source=sp3.gaussian_emitter(d.source_center, d.source_sigma,
                                        d.source_amplitude))
        grid = cfg.grid()
        base = Forest.uniform(grid, cfg.max_level)
        base.finalize()
        src = physics.source_on_leaves(base)
        forest = mra.adapt(base, [src], mra.ThresholdSpec(eta=cfg.eta))
        constants = sp3.Sp3Constants()
        lam_p = sp3.PhotoGroupParams().lam[0] * physics.p_o2
        mu2 = (lam_p / constants.kappa[0]) ** 2
        bc = assembly.BCSpec.uniform(
            assembly.Robin(coefficient=lam_p * constants.alpha[0]), cfg.dims)
        matrix, _ = assembly.assemble_adapted(
            forest, assembly.FluxScheme(), assembly.OperatorSpec.screened(mu2),
            bc)
    else:
        grid = cfg.grid()
        base = Forest.uniform(grid, cfg.max_level)
        base.finalize()
        pts = np.array([grid.center(c)
                        for c in base.enumerate_leaves().cells])
        p = cfg.gaussian
        fields = [harness.exact_solution(pts, p),
                  harness.exact_source(pts, p, cfg.dims)]
        forest = mra.adapt(base, fields, mra.ThresholdSpec(eta=cfg.eta))
        matrix, _ = assembly.assemble_adapted(
            forest, assembly.FluxScheme(), assembly.OperatorSpec.laplace(),
            harness.case_bc(cfg))
    path = os.path.join(out, "matrix.mtx")
    harness.export_matrix(path, matrix)
    stats = matrix.stats()
    print(f"n={stats.n} nnz={stats.nnz} nnz/row={stats.ratio:.2f} "
          f"symmetry_fraction={stats.symmetry_fraction:.4f}")
    print(f"wrote {path}")


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
        if args.command == "run":
            _cmd_run(cfg)
        elif args.command == "study":
            _cmd_study(cfg)
        elif args.command == "sp3":
            if cfg.case != "sp3demo":
                raise ConfigError("the sp3 command needs case = \"sp3demo\"")
            _cmd_sp3(cfg)
        else:
            _cmd_export_matrix(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
