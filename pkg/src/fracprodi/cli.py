"""Command line entry point: ``fracprodi <subcommand> --config <path> [--seed N] [--out DIR]``.

Exit codes: 0 success, 1 numerical failure where convergence was required,
2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .apsweep import NONEXISTENCE_NOTE, SolveBudget, find_rho_star, records_to_csv, solvable, sweep
from .config import (
    Config,
    MCSpec,
    build_grid,
    config_hash,
    domain_of,
    parse_config,
    provenance_json,
    resolve_field,
)
from .errors import (
    APAssumptionError,
    BracketInvalid,
    ConfigError,
    EigenvaluePreconditionFailed,
    FracProdiError,
    InsufficientSurvivors,
    NoConvergence,
    PredicateInconsistent,
)
from .fraclap import assemble
from .linear import LinearSolver, abp_bound
from .semilinear import JumpingLinear, PowerAP, make_problem
from .spectral import principal_eigenpair
from .stochastic import mc_duhamel_solution, mc_principal_eigenvalue, mean_exit_time
from .validate import run_suite

log = logging.getLogger("fracprodi")

SUBCOMMANDS = ("eigen", "solve", "solve-semilinear", "mc", "sweep", "validate")
EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class Writer:
    """Writes outputs under one directory, each stamped with the config hash and seed."""

    def __init__(self, cfg: Config, out: Path):
        self.out = out
        self.hash = config_hash(cfg)
        self.seed = cfg.mc.seed if cfg.mc is not None and cfg.mc.seed is not None else cfg.seed
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(provenance_json(cfg))

    @property
    def header_lines(self):
        return (f"config_sha256: {self.hash}", f"seed: {self.seed}", f"fracprodi {__version__}")

    def json(self, name: str, payload: dict):
        doc = {"header": {"config_sha256": self.hash, "seed": self.seed, "version": __version__}}
        doc.update(_jsonable(payload))
        (self.out / name).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    def gridfn(self, name: str, u):
        u.to_csv(self.out / name, self.header_lines)


def _operator(cfg: Config):
    return assemble(build_grid(cfg), cfg.s)


def _nonlinearity(cfg: Config):
    spec = cfg.nonlinearity
    if spec is None:
        raise UsageError("this subcommand needs a 'nonlinearity' block")
    if spec.family == "jumping":
        return JumpingLinear(spec.mu_minus, spec.mu_plus)
    return PowerAP(spec.a0, spec.p, spec.slope_neg)


def _problem(cfg: Config, op):
    f = _nonlinearity(cfg)
    eig = principal_eigenpair(op, tol=cfg.tol.eigen)
    grid = op.grid
    return make_problem(
        op,
        f,
        rho=cfg.rho or 0.0,
        h=resolve_field(cfg.h, grid, eig.psi),
        V1=resolve_field(cfg.V1, grid, eig.psi),
        V2=resolve_field(cfg.V2, grid, eig.psi),
        C_ap=cfg.C_ap,
    )


def _budget(cfg: Config) -> SolveBudget:
    return SolveBudget(tol=cfg.tol.iteration, newton_tol=cfg.tol.newton, seed=cfg.seed)


def cmd_eigen(cfg: Config, w: Writer) -> int:
    op = _operator(cfg)
    V = resolve_field(cfg.V, op.grid)
    eig = principal_eigenpair(op, V, tol=cfg.tol.eigen)
    w.gridfn("eigenvector.csv", eig.psi)
    w.json(
        "eigen.json",
        {"lambda_star": eig.lambda_star, "n": op.n, "s": cfg.s, "iterations": eig.iterations, "residual": eig.residual},
    )
    print(f"lambda_star = {eig.lambda_star:.12g}")
    return EXIT_OK


def cmd_solve(cfg: Config, w: Writer) -> int:
    op = _operator(cfg)
    grid = op.grid
    V = resolve_field(cfg.V, grid)
    g = resolve_field(cfg.g, grid)
    solver = LinearSolver(op, V)
    u = solver.solve(g)
    w.gridfn("solution.csv", u)
    w.json(
        "solve.json",
        {
            "lambda_star": solver.lambda_star,
            "kappa_hat": abp_bound(op, V, solver.lambda_star),
            "residual": solver.residual(u, g),
            "sup_norm": u.sup_norm(),
        },
    )
    print(f"sup|u| = {u.sup_norm():.12g}")
    return EXIT_OK


def cmd_solve_semilinear(cfg: Config, w: Writer) -> int:
    op = _operator(cfg)
    problem = _problem(cfg, op)
    rec = solvable(problem, _budget(cfg))
    for i, u in enumerate(rec.solutions):
        w.gridfn(f"solution_{i}.csv", u)
    w.json(
        "semilinear.json",
        {
            "rho": rec.rho,
            "status": rec.status_label,
            "n_solutions": rec.n_solutions_found,
            "minimal_sup_norm": rec.minimal_sup_norm,
            "diagnostics": rec.diagnostics,
            "notes": rec.notes,
            "nonexistence_note": NONEXISTENCE_NOTE,
        },
    )
    print(f"rho = {rec.rho:g}: {rec.status_label}")
    return EXIT_OK if rec.solved else EXIT_NUMERIC


def cmd_mc(cfg: Config, w: Writer) -> int:
    mc = cfg.mc
    if mc is None or mc.seed is None:
        raise UsageError("mc needs an 'mc' block with a seed (or --seed)")
    domain = domain_of(cfg)
    grid = build_grid(cfg)
    rows = []
    for probe in mc.probes:
        x0 = probe[0] if grid.dim == 1 else np.asarray(probe, dtype=float)
        if mc.estimator == "exit_time":
            est = mean_exit_time(x0, domain, cfg.s, mc.dt, mc.tmax, mc.paths, mc.seed, workers=mc.workers)
        elif mc.estimator == "eigenvalue":
            est = mc_principal_eigenvalue(
                x0, domain, cfg.s, mc.t_window, mc.paths, mc.dt, mc.seed,
                V=resolve_field(cfg.V, grid), grid=grid, workers=mc.workers,
            )
        else:
            est = mc_duhamel_solution(
                x0, grid, cfg.s, resolve_field(cfg.V, grid), resolve_field(cfg.g, grid),
                mc.paths, mc.dt, mc.tmax, mc.seed, workers=mc.workers,
            )
        rows.append({"probe": list(probe), **est.as_dict()})
        print(f"{mc.estimator} at {list(probe)}: {est.mean:.6g} +- {est.stderr:.2g}")
    w.json("mc.json", {"estimator": mc.estimator, "dt": mc.dt, "tmax": mc.tmax, "estimates": rows})
    return EXIT_OK


def cmd_sweep(cfg: Config, w: Writer) -> int:
    if cfg.rho_list is None and cfg.bracket is None:
        raise UsageError("sweep needs 'rho_list' and/or 'bracket'")
    op = _operator(cfg)
    problem = _problem(cfg, op)
    budget = _budget(cfg)
    summary = {"nonexistence_note": NONEXISTENCE_NOTE}
    if cfg.rho_list is not None:
        records = sweep(problem, cfg.rho_list, budget)
        records_to_csv(records, w.out / "sweep.csv", w.header_lines)
        summary["records"] = [
            {"rho": r.rho, "status": r.status_label, "n_solutions": r.n_solutions_found, "notes": r.notes}
            for r in records
        ]
    if cfg.bracket is not None:
        res = find_rho_star(problem, cfg.bracket, cfg.tol.rho, budget)
        summary.update(
            rho_star=res.rho_star,
            tol_rho=cfg.tol.rho,
            bracket_evals=[{"rho": r, "solvable": ok} for r, ok in res.evaluations],
        )
        print(f"rho_star = {res.rho_star:.6g} (bracket [{res.lo:.6g}, {res.hi:.6g}])")
    w.json("sweep.json", summary)
    return EXIT_OK


def cmd_validate(cfg: Config, w: Writer) -> int:
    results = run_suite(w.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.value:.6g} ({r.detail})")
    ok = all(r.passed for r in results)
    w.json("validate.json", {"passed": ok, "checks": [r.as_dict() for r in results]})
    return EXIT_OK if ok else EXIT_NUMERIC


COMMANDS = {
    "eigen": cmd_eigen,
    "solve": cmd_solve,
    "solve-semilinear": cmd_solve_semilinear,
    "mc": cmd_mc,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


def _apply_overrides(cfg: Config, args) -> Config:
    update = {}
    if args.seed is not None:
        update["seed"] = args.seed
        mc = cfg.mc or MCSpec()
        update["mc"] = mc.model_copy(update={"seed": args.seed})
    if args.out is not None:
        update["output"] = str(args.out)
    return cfg.model_copy(update=update) if update else cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracprodi", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _apply_overrides(parse_config(args.config), args)
        writer = Writer(cfg, Path(cfg.output))
        return COMMANDS[args.subcommand](cfg, writer)
    except (ConfigError, UsageError, BracketInvalid, APAssumptionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NoConvergence, EigenvaluePreconditionFailed, InsufficientSurvivors, PredicateInconsistent) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FracProdiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
