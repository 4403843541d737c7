"""Linear Dirichlet problem ((-Delta)^s + V) u = g with zero exterior data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import EigenvaluePreconditionFailed, PreconditionNotMet, SingularSystem
from .fraclap import DiscreteOp
from .grid import GridFn, as_values
from .spectral import principal_eigenvalue

__all__ = [
    "solve_dirichlet",
    "check_comparison",
    "ComparisonReport",
    "abp_bound",
    "LinearSolver",
]

COMPARISON_TOL = 1e-9


def _require_positive(op, V, lambda_star):
    lam = principal_eigenvalue(op, V) if lambda_star is None else lambda_star
    # an eigenvalue within rounding of zero counts as zero
    if lam <= COMPARISON_TOL:
        raise EigenvaluePreconditionFailed(f"principal eigenvalue {lam:.6g} is not positive")
    return lam


class LinearSolver:
    """Cholesky factorisation of A + diag(V), reused across right-hand sides."""

    def __init__(self, op: DiscreteOp, V=None, lambda_star: float | None = None):
        self.op = op
        self.v = as_values(V, op.grid)
        self.lambda_star = _require_positive(op, self.v, lambda_star)
        self.matrix = op.matrix + np.diag(self.v)
        try:
            self._factor = cho_factor(self.matrix)
        except LinAlgError as exc:
            raise SingularSystem(str(exc)) from exc

    def solve(self, g) -> GridFn:
        rhs = as_values(g, self.op.grid)
        u = cho_solve(self._factor, rhs)
        return GridFn(self.op.grid, u)

    def residual(self, u, g) -> float:
        return float(np.max(np.abs(self.matrix @ as_values(u, self.op.grid) - as_values(g, self.op.grid))))


def solve_dirichlet(op: DiscreteOp, V, g, lambda_star: float | None = None) -> GridFn:
    """Unique solution of (A + diag(V)) u = g; requires a positive principal eigenvalue."""
    return LinearSolver(op, V, lambda_star).solve(g)


@dataclass(frozen=True)
class ComparisonReport:
    holds: bool
    worst_violation: float
    sub_margin: float
    super_margin: float


def check_comparison(op: DiscreteOp, V, u_sub, v_super, lambda_star: float | None = None) -> ComparisonReport:
    """Discrete weak maximum principle for a sub/supersolution pair.

    `worst_violation` is max(u_sub - v_super); it is <= 0 when the conclusion holds.
    """
    _require_positive(op, V, lambda_star)
    grid = op.grid
    M = op.matrix + np.diag(as_values(V, grid))
    u = as_values(u_sub, grid)
    v = as_values(v_super, grid)
    Lu = M @ u
    Lv = M @ v
    if np.max(Lu) > COMPARISON_TOL:
        i = int(np.argmax(Lu))
        raise PreconditionNotMet(f"subsolution inequality fails at node {i} by {Lu[i]:.3e}")
    if np.min(Lv) < -COMPARISON_TOL:
        i = int(np.argmin(Lv))
        raise PreconditionNotMet(f"supersolution inequality fails at node {i} by {-Lv[i]:.3e}")
    worst = float(np.max(u - v))
    return ComparisonReport(worst <= COMPARISON_TOL, worst, float(-np.max(Lu)), float(np.min(Lv)))


def abp_bound(op: DiscreteOp, V, lambda_star: float | None = None) -> float:
    """Infinity-norm of (A + diag(V))^{-1}: sup|u| <= abp_bound * sup|g| for every g."""
    solver = LinearSolver(op, V, lambda_star)
    inv = cho_solve(solver._factor, np.eye(op.n))
    return float(np.max(np.sum(np.abs(inv), axis=1)))
