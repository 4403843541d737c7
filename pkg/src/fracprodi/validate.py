"""Deterministic property suite behind the `validate` subcommand.

Each check returns a `CheckResult`; nothing here reads the clock or global
random state, so two runs with the same seed give identical reports.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

from .apsweep import solvable
from .fraclap import assemble
from .grid import Interval, make_interval_grid
from .linear import solve_dirichlet
from .semilinear import JumpingLinear, make_problem, monotone_iteration, build_subsolution
from .spectral import domain_monotonicity_report, eigen_monotonicity_report, principal_eigenvalue
from .stochastic import mean_exit_time

__all__ = ["CheckResult", "run_suite", "CHECKS"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "value": float(self.value),
            "threshold": float(self.threshold),
            "detail": self.detail,
        }


def _torsion(seed: int) -> CheckResult:
    grid = make_interval_grid(-1.0, 1.0, 200)
    u = solve_dirichlet(assemble(grid, 0.5), 0.0, 1.0)
    err = float(np.max(np.abs(u.values - np.sqrt(1.0 - grid.nodes**2))))
    return CheckResult("torsion_s05", err <= 0.02, err, 0.02, "sup error vs (1 - x^2)^(1/2), n=200")


def _m_matrix(seed: int) -> CheckResult:
    worst = -math.inf
    for s in (0.1, 0.3, 0.5, 0.7, 0.9):
        A = assemble(make_interval_grid(-1.0, 1.0, 50), s).matrix
        off = A - np.diag(np.diag(A))
        worst = max(worst, float(off.max()), float(np.max(np.abs(A - A.T))))
    return CheckResult("m_matrix_symmetry", worst <= 0.0, worst, 0.0, "max off-diagonal entry / asymmetry")


def _scaling(seed: int) -> CheckResult:
    worst = 0.0
    for s in (0.3, 0.5, 0.7):
        l1 = principal_eigenvalue(assemble(make_interval_grid(-1.0, 1.0, 100), s))
        l2 = principal_eigenvalue(assemble(make_interval_grid(-2.0, 2.0, 100), s))
        worst = max(worst, abs(l2 / (2.0 ** (-2 * s) * l1) - 1.0))
    return CheckResult("eigen_scaling", worst <= 5e-3, worst, 5e-3, "relative error of the 2^(-2s) law")


def _potential_monotonicity(seed: int) -> CheckResult:
    rng = np.random.default_rng([seed, 1])
    op = assemble(make_interval_grid(-1.0, 1.0, 60), 0.5)
    fails = 0
    for _ in range(10):
        V = rng.uniform(-0.5, 2.0, op.n)
        Vt = V + rng.uniform(0.0, 1.0, op.n) * (rng.random(op.n) < 0.5)
        Vt[rng.integers(op.n)] += 0.1
        fails += not eigen_monotonicity_report(op, V, Vt).strict
    return CheckResult("potential_monotonicity", fails == 0, fails, 0, "10 random ordered pairs")


def _domain_monotonicity(seed: int) -> CheckResult:
    fails = 0
    for inner, outer in ((Interval(-0.5, 0.5), Interval(-1, 1)), (Interval(0, 1), Interval(-1, 1))):
        fails += not domain_monotonicity_report(0.5, inner, outer, 80).strict
    return CheckResult("domain_monotonicity", fails == 0, fails, 0, "nested intervals, s=0.5")


def _maximum_principle(seed: int) -> CheckResult:
    rng = np.random.default_rng([seed, 2])
    op = assemble(make_interval_grid(-1.0, 1.0, 60), 0.4)
    worst = math.inf
    for _ in range(20):
        V = rng.uniform(-1.0, 3.0, op.n)
        g = rng.uniform(0.0, 1.0, op.n) * (rng.random(op.n) < 0.7)
        if principal_eigenvalue(op, V) <= 0:
            continue
        worst = min(worst, float(solve_dirichlet(op, V, g).values.min()))
    return CheckResult("maximum_principle", worst >= -1e-10, worst, -1e-10, "min u over 20 random cases")


def _jumping_minimal(seed: int) -> CheckResult:
    op = assemble(make_interval_grid(-1.0, 1.0, 100), 0.5)
    P = make_problem(op, JumpingLinear(0.5, 2.5), rho=-1.0)
    res = monotone_iteration(P, build_subsolution(P), op.grid.zeros())
    exact = -P.phi1.values / (P.lambda0 - 0.5)
    err = float(np.max(np.abs(res.solution.values - exact)))
    ok = err <= 1e-7 and res.monotone_certificate
    return CheckResult("jumping_minimal_solution", ok, err, 1e-7, "monotone iteration vs -phi1/(lambda0 - mu-)")


def _threshold_shape(seed: int) -> CheckResult:
    op = assemble(make_interval_grid(-1.0, 1.0, 100), 0.5)
    P = make_problem(op, JumpingLinear(0.5, 2.5))
    below = solvable(P.with_rho(-1.0))
    zero = solvable(P.with_rho(0.0))
    above = solvable(P.with_rho(2.0))
    ok = below.n_solutions_found >= 2 and zero.solved and not above.solved
    return CheckResult(
        "threshold_shape",
        ok,
        below.n_solutions_found,
        2,
        f"statuses {below.status_label}, {zero.status_label}, {above.status_label}",
    )


def _exit_time(seed: int) -> CheckResult:
    est = mean_exit_time(0.0, Interval(-1.0, 1.0), 0.5, 1e-3, 20.0, 4000, seed)
    # E[tau] at the centre of (-1, 1): Gamma(1/2) / (4^s Gamma(1/2 + s) Gamma(1 + s)) with s = 1/2
    exact = float(gamma(0.5) / (2.0 * gamma(1.0) * gamma(1.5)))
    tol = max(4 * est.stderr, 0.08)
    dev = abs(est.mean - exact)
    return CheckResult("mc_exit_time", bool(dev <= tol), est.mean, exact, f"4000 paths, dt=1e-3, stderr={est.stderr:.4g}")


CHECKS = (
    _torsion,
    _m_matrix,
    _scaling,
    _potential_monotonicity,
    _domain_monotonicity,
    _maximum_principle,
    _jumping_minimal,
    _threshold_shape,
    _exit_time,
)


def run_suite(seed: int = 0) -> list[CheckResult]:
    return [check(seed) for check in CHECKS]
