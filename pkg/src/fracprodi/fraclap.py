"""Discrete Dirichlet fractional Laplacian on interval and disc grids.

1D: fractional centred differences (symmetric Toeplitz M-matrix).
2D: lattice quadrature of the singular integral with an analytic far field.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.linalg import toeplitz
from scipy.special import gamma, gammaln

from .errors import GridMismatch, OutOfRange
from .grid import Grid, GridFn, as_values

__all__ = [
    "DiscreteOp",
    "normalizing_constant",
    "fcd_weights",
    "assemble_1d",
    "assemble_2d",
    "assemble",
    "apply",
]


@dataclass(frozen=True, eq=False)
class DiscreteOp:
    grid: Grid
    s: float
    matrix: np.ndarray
    norm_const: float

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def n(self) -> int:
        return self.grid.n

    def __matmul__(self, u):
        return apply(self, u)

    def to_csv(self, path=None) -> str:
        lines = [",".join(f"{v:.17g}" for v in row) for row in self.matrix]
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _check_order(s):
    if not 0.0 < s < 1.0:
        raise OutOfRange(f"order s must lie in (0, 1), got {s}")


def normalizing_constant(d: int, s: float) -> float:
    """C(d, s) = 4^s Gamma(d/2 + s) / (pi^(d/2) |Gamma(-s)|)."""
    _check_order(s)
    if d not in (1, 2):
        raise OutOfRange(f"dimension must be 1 or 2, got {d}")
    return 4.0**s * gamma(d / 2 + s) / (math.pi ** (d / 2) * abs(gamma(-s)))


def fcd_weights(s: float, K: int) -> np.ndarray:
    """Fractional centred-difference weights g_0..g_K.

    g_0 = Gamma(2s+1) / Gamma(s+1)^2 and g_{k+1} = g_k (k - s) / (k + s + 1).
    """
    if K < 1:
        raise ValueError(f"truncation length must be >= 1, got {K}")
    g = np.empty(K + 1)
    g[0] = math.exp(gammaln(2 * s + 1) - 2 * gammaln(s + 1))
    k = np.arange(K)
    g[1:] = g[0] * np.cumprod((k - s) / (k + s + 1))
    return g


def assemble_1d(grid: Grid, s: float) -> DiscreteOp:
    _check_order(s)
    if grid.dim != 1:
        raise GridMismatch("assemble_1d needs an interval grid")
    n = grid.n
    # exterior nodes carry u = 0, so the Toeplitz band stops at the domain edge
    g = fcd_weights(s, max(n - 1, 1))[:n]
    A = toeplitz(g * grid.spacing ** (-2 * s))
    return DiscreteOp(grid, s, A, normalizing_constant(1, s))


@lru_cache(maxsize=32)
def _lattice_diagonal(s: float, window: int) -> float:
    """sum_{0<|k|_inf<=N} |k|^{-2-2s} + integral of |y|^{-2-2s} outside the square of half-side N+1/2."""
    k = np.arange(-window, window + 1, dtype=float)
    kx, ky = np.meshgrid(k, k, indexing="ij")
    r2 = kx**2 + ky**2
    r2[window, window] = np.inf
    near = float(np.sum(r2 ** (-1.0 - s)))
    # outside the square: (a^{-2s} / 2s) * 8 * int_0^{pi/4} cos(t)^{2s} dt, a = N + 1/2
    ang, _ = integrate.quad(lambda t: math.cos(t) ** (2 * s), 0.0, math.pi / 4, epsabs=1e-14)
    a = window + 0.5
    return near + 8.0 * ang * a ** (-2 * s) / (2 * s)


def assemble_2d(grid: Grid, s: float) -> DiscreteOp:
    """Lattice quadrature of C(2,s) PV int (u(x) - u(y)) |x - y|^{-2-2s} dy.

    Every lattice cell y != x contributes h^2 |x - y|^{-2-2s}; cells outside the
    domain only feed the diagonal because u vanishes there. The cell containing x
    is dropped (its symmetric contribution vanishes to leading order).
    """
    _check_order(s)
    if grid.dim != 2 or grid.lattice is None:
        raise GridMismatch("assemble_2d needs a ball grid")
    h = grid.spacing
    C = normalizing_constant(2, s)
    # lattice coordinates are stored doubled; node offsets are whole cells
    diff = (grid.lattice[:, None, :] - grid.lattice[None, :, :]) // 2
    r2 = np.sum(diff * diff, axis=-1).astype(float)
    np.fill_diagonal(r2, np.inf)
    A = -C * h ** (-2 * s) * r2 ** (-1.0 - s)
    span = int(np.max(np.abs(diff))) if grid.n > 1 else 1
    window = max(4 * span, 400)
    diag = C * h ** (-2 * s) * _lattice_diagonal(float(s), window)
    np.fill_diagonal(A, diag)
    return DiscreteOp(grid, s, A, C)


def assemble(grid: Grid, s: float) -> DiscreteOp:
    return assemble_1d(grid, s) if grid.dim == 1 else assemble_2d(grid, s)


def apply(op: DiscreteOp, u) -> GridFn:
    if isinstance(u, GridFn) and not op.grid.same_as(u.grid):
        raise GridMismatch("operand lives on a different grid")
    return GridFn(op.grid, op.matrix @ as_values(u, op.grid))
