"""Principal Dirichlet eigenpair of (-Delta)^s + V by shifted inverse iteration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import (
    ContainmentPreconditionFailed,
    NoConvergence,
    OrderingPreconditionFailed,
    PositivityViolation,
)
from .fraclap import DiscreteOp, assemble
from .grid import Domain, GridFn, Interval, as_values, make_interval_grid

__all__ = [
    "EigenPair",
    "principal_eigenpair",
    "principal_eigenvalue",
    "spectral_gap",
    "eigen_monotonicity_report",
    "domain_monotonicity_report",
    "MonotonicityReport",
    "DomainMonotonicityReport",
    "richardson_limits",
]

#: eigen-residual that inverse iteration must reach on top of the increment test
RESIDUAL_TARGET = 1e-9


@dataclass(frozen=True)
class EigenPair:
    lambda_star: float
    psi: GridFn
    iterations: int = 0
    residual: float = 0.0


def _matrix(op: DiscreteOp, V) -> np.ndarray:
    v = as_values(V, op.grid)
    return op.matrix + np.diag(v), v


def principal_eigenpair(
    op: DiscreteOp,
    V=None,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    seed: int | None = None,
) -> EigenPair:
    """Smallest eigenvalue of A + diag(V) with its positive, sup-normalised eigenvector.

    Inverse iteration on A + diag(V) + sigma*I with sigma = max(0, -min V) + 1. The
    loop stops once successive Rayleigh quotients differ by at most `tol` and the
    eigen-residual is below RESIDUAL_TARGET (scaled by max(1, |lambda|)).
    """
    M, v = _matrix(op, V)
    sigma = max(0.0, -float(v.min())) + 1.0
    factor = cho_factor(M + sigma * np.eye(op.n))
    if seed is None:
        x = np.ones(op.n)
    else:
        x = np.random.default_rng(seed).uniform(0.5, 1.5, op.n)
    x /= np.linalg.norm(x)
    lam = float(x @ M @ x)
    for it in range(1, max_iter + 1):
        y = cho_solve(factor, x)
        x = y / np.linalg.norm(y)
        Mx = M @ x
        lam_new = float(x @ Mx)
        scale = np.max(np.abs(x))
        res = float(np.max(np.abs(Mx - lam_new * x))) / scale
        done = abs(lam_new - lam) <= tol and res <= RESIDUAL_TARGET * max(1.0, abs(lam_new))
        lam = lam_new
        if done:
            break
    else:
        raise NoConvergence(f"inverse iteration did not converge in {max_iter} iterations")
    x = x / x[np.argmax(np.abs(x))]
    if np.any(x <= 0):
        raise PositivityViolation("principal eigenvector changes sign")
    return EigenPair(lam, GridFn(op.grid, x), it, res)


def principal_eigenvalue(op: DiscreteOp, V=None, tol: float = 1e-10) -> float:
    return principal_eigenpair(op, V, tol).lambda_star


def spectral_gap(op: DiscreteOp, V=None, tol: float = 1e-10, max_iter: int = 10_000) -> tuple[float, float]:
    """Two lowest eigenvalues via 2-vector block inverse iteration with Rayleigh-Ritz."""
    M, v = _matrix(op, V)
    sigma = max(0.0, -float(v.min())) + 1.0
    factor = cho_factor(M + sigma * np.eye(op.n))
    rng = np.random.default_rng(0)
    X = np.linalg.qr(rng.standard_normal((op.n, 2)))[0]
    theta = np.zeros(2)
    for _ in range(max_iter):
        X = np.linalg.qr(cho_solve(factor, X))[0]
        H = X.T @ M @ X
        w, Q = np.linalg.eigh(H)
        X = X @ Q
        if np.all(np.abs(w - theta) <= tol):
            theta = w
            break
        theta = w
    else:
        raise NoConvergence("block iteration did not converge")
    return float(theta[0]), float(theta[1])


@dataclass(frozen=True)
class MonotonicityReport:
    lambda_V: float
    lambda_V_tilde: float
    strict: bool


def eigen_monotonicity_report(op: DiscreteOp, V, V_tilde, tol: float = 1e-10) -> MonotonicityReport:
    v = as_values(V, op.grid)
    vt = as_values(V_tilde, op.grid)
    if np.any(vt < v) or not np.any(vt > v):
        raise OrderingPreconditionFailed("need V_tilde >= V with strict inequality somewhere")
    lam = principal_eigenvalue(op, v, tol)
    lam_t = principal_eigenvalue(op, vt, tol)
    return MonotonicityReport(lam, lam_t, lam_t > lam)


@dataclass(frozen=True)
class DomainMonotonicityReport:
    lambda_inner: float
    lambda_outer: float
    strict: bool


def _contains(inner: Domain, outer: Domain) -> bool:
    if isinstance(inner, Interval) and isinstance(outer, Interval):
        return outer.a <= inner.a and inner.b <= outer.b and (outer.a, outer.b) != (inner.a, inner.b)
    return False


def domain_monotonicity_report(s: float, inner: Domain, outer: Domain, n: int, tol: float = 1e-10):
    """Principal eigenvalues (V = 0) on nested intervals discretised with the same node count."""
    if not _contains(inner, outer):
        raise ContainmentPreconditionFailed(f"{inner} is not strictly contained in {outer}")
    lam_in = principal_eigenvalue(assemble(make_interval_grid(inner.a, inner.b, n), s), None, tol)
    lam_out = principal_eigenvalue(assemble(make_interval_grid(outer.a, outer.b, n), s), None, tol)
    return DomainMonotonicityReport(lam_in, lam_out, lam_in > lam_out)


def richardson_limits(values, ratio: float = 2.0) -> list[tuple[float, float]]:
    """(observed order, extrapolated limit) for each consecutive triple of a refinement sequence.

    `values` come from grids whose spacing shrinks by `ratio` at every step.
    """
    v = np.asarray(values, dtype=float)
    out = []
    for a, b, c in zip(v, v[1:], v[2:]):
        d1, d2 = b - a, c - b
        p = float(np.log(abs(d1 / d2)) / np.log(ratio))
        out.append((p, float(c + d2 / (ratio**p - 1.0))))
    return out
