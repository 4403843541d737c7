"""Bounded domains, uniform interior grids and grid functions.

Grid functions store values at interior nodes only; every point outside the
domain (boundary included) implicitly carries the value 0.
"""
from __future__ import annotations

import io
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import GridMismatch, InvalidBounds, TooFewNodes

__all__ = [
    "Interval",
    "Ball",
    "Domain",
    "Grid",
    "GridFn",
    "make_interval_grid",
    "make_ball_grid",
    "distance_to_boundary",
    "boundary_ratio",
    "as_values",
]


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise InvalidBounds(f"interval needs a < b, got ({self.a}, {self.b})")

    dim = 1

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return (x > self.a) & (x < self.b)

    def distance(self, x):
        x = np.asarray(x, dtype=float)
        return np.minimum(x - self.a, self.b - x)

    def scaled(self, r: float) -> "Interval":
        return Interval(self.a * r, self.b * r)


@dataclass(frozen=True)
class Ball:
    radius: float
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidBounds(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 2:
            raise InvalidBounds("only 2D balls are supported")

    dim = 2

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - np.asarray(self.center), axis=-1) < self.radius

    def distance(self, x):
        x = np.asarray(x, dtype=float)
        return self.radius - np.linalg.norm(x - np.asarray(self.center), axis=-1)


Domain = Union[Interval, Ball]


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform lattice restricted to the interior of `domain`.

    `nodes` has shape (n,) in 1D and (n, 2) in 2D; for ball grids `lattice`
    holds the integer lattice coordinates of each node.
    """

    domain: Domain
    spacing: float
    nodes: np.ndarray
    dim: int
    lattice: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.nodes.setflags(write=False)
        if self.lattice is not None:
            self.lattice.setflags(write=False)

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    def __len__(self):
        return self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    def distances(self) -> np.ndarray:
        return self.domain.distance(self.nodes)

    def same_as(self, other: "Grid") -> bool:
        if self is other:
            return True
        return (
            self.domain == other.domain
            and self.spacing == other.spacing
            and self.nodes.shape == other.nodes.shape
            and np.array_equal(self.nodes, other.nodes)
        )

    def fn(self, values) -> "GridFn":
        return GridFn(self, values)

    def zeros(self) -> "GridFn":
        return GridFn(self, np.zeros(self.n))

    def ones(self) -> "GridFn":
        return GridFn(self, np.ones(self.n))

    def sample(self, func) -> "GridFn":
        """Evaluate `func` (vectorised over nodes) at the interior nodes."""
        return GridFn(self, np.broadcast_to(func(self.nodes), (self.n,)).astype(float))


def make_interval_grid(a: float, b: float, n: int) -> Grid:
    if not a < b:
        raise InvalidBounds(f"invalid bounds: a={a} must be < b={b}")
    if n < 3:
        raise TooFewNodes(f"need at least 3 interior nodes, got {n}")
    h = (b - a) / (n + 1)
    nodes = a + h * np.arange(1, n + 1)
    return Grid(Interval(a, b), h, nodes, 1)


def make_ball_grid(radius: float, m: int, center=(0.0, 0.0)) -> Grid:
    """Lattice with m points per axis and spacing 2*radius/(m+1), clipped to the open disc."""
    if not radius > 0:
        raise TooFewNodes(f"radius {radius} leaves no interior nodes")
    if m < 5:
        raise TooFewNodes(f"need at least 5 nodes per axis, got {m}")
    ball = Ball(radius, center)
    h = 2.0 * radius / (m + 1)
    k = np.arange(m) - (m - 1) / 2.0
    # lexicographic order: x first, then y
    kx, ky = np.meshgrid(k, k, indexing="ij")
    lat = np.column_stack([kx.ravel(), ky.ravel()])
    pts = lat * h + np.asarray(ball.center)
    keep = ball.contains(pts)
    if not keep.any():
        raise TooFewNodes("interior node set is empty")
    lattice = np.rint(2 * lat[keep]).astype(np.int64)  # doubled so even m stays integral
    return Grid(ball, h, pts[keep], 2, lattice)


def distance_to_boundary(grid: Grid, index: int) -> float:
    return float(grid.domain.distance(grid.nodes[index]))


class GridFn:
    """Real values at the interior nodes of a grid, zero outside the domain."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        values = np.array(values, dtype=float).reshape(-1)
        if values.shape[0] != grid.n:
            if values.shape[0] == 1:
                values = np.full(grid.n, values[0])
            else:
                raise GridMismatch(f"{values.shape[0]} values for a grid of {grid.n} nodes")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    def __repr__(self):
        return f"GridFn(n={self.grid.n}, sup={self.sup_norm():.6g})"

    def __len__(self):
        return self.grid.n

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def _other(self, other):
        if isinstance(other, GridFn):
            if not self.grid.same_as(other.grid):
                raise GridMismatch("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return GridFn(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFn(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return GridFn(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return GridFn(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFn(self.grid, self.values / self._other(other))

    def __neg__(self):
        return GridFn(self.grid, -self.values)

    def minimum(self, other) -> "GridFn":
        return GridFn(self.grid, np.minimum(self.values, self._other(other)))

    def maximum(self, other) -> "GridFn":
        return GridFn(self.grid, np.maximum(self.values, self._other(other)))

    @property
    def positive_part(self) -> "GridFn":
        return GridFn(self.grid, np.maximum(self.values, 0.0))

    @property
    def negative_part(self) -> "GridFn":
        return GridFn(self.grid, np.maximum(-self.values, 0.0))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def evaluate(self, points) -> np.ndarray:
        """Values at arbitrary points: linear interpolation in 1D, nearest node in 2D; 0 outside."""
        points = np.asarray(points, dtype=float)
        dom = self.grid.domain
        inside = dom.contains(points)
        if self.grid.dim == 1:
            xp = np.concatenate([[dom.a], self.grid.nodes, [dom.b]])
            fp = np.concatenate([[0.0], self.values, [0.0]])
            out = np.interp(points, xp, fp)
        else:
            out = self.values[nearest_node(self.grid, points)]
        return np.where(inside, out, 0.0)

    def to_csv(self, path=None, header_lines=()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        if self.grid.dim == 1:
            buf.write("x,value\n")
            for x, v in zip(self.grid.nodes, self.values):
                buf.write(f"{x:.17g},{v:.17g}\n")
        else:
            buf.write("x,y,value\n")
            for (x, y), v in zip(self.grid.nodes, self.values):
                buf.write(f"{x:.17g},{y:.17g},{v:.17g}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, grid: Grid, path_or_text) -> "GridFn":
        if "\n" in str(path_or_text):
            lines = str(path_or_text).splitlines()
        else:
            with open(path_or_text) as fh:
                lines = fh.read().splitlines()
        rows = [ln for ln in lines if ln and not ln.startswith("#")]
        data = np.array([[float(t) for t in r.split(",")] for r in rows[1:]])
        coords = data[:, :-1].reshape(-1) if grid.dim == 1 else data[:, :-1]
        nodes = grid.nodes
        if coords.shape != nodes.shape or not np.allclose(coords, nodes, rtol=0, atol=1e-12):
            raise GridMismatch("CSV node coordinates do not match the grid")
        return cls(grid, data[:, -1])


def nearest_node(grid: Grid, points) -> np.ndarray:
    """Index of the interior node closest to each point."""
    points = np.asarray(points, dtype=float)
    if grid.dim == 1:
        a = grid.domain.a
        idx = np.rint((points - a) / grid.spacing).astype(np.int64) - 1
        return np.clip(idx, 0, grid.n - 1)
    pts = points.reshape(-1, 2)
    if grid.lattice is None:
        return _kdtree(grid).query(pts)[1].reshape(points.shape[:-1])
    # round to the full lattice, then look up the interior node sitting there
    table, origin = _lattice_table(grid)
    k = np.rint((pts - origin) / grid.spacing).astype(np.int64)
    ok = np.all((k >= 0) & (k < np.array(table.shape)), axis=1)
    idx = np.full(pts.shape[0], -1, dtype=np.int64)
    idx[ok] = table[k[ok, 0], k[ok, 1]]
    miss = idx < 0
    if miss.any():
        idx[miss] = _kdtree(grid).query(pts[miss])[1]
    return idx.reshape(points.shape[:-1])


@lru_cache(maxsize=16)
def _kdtree(grid: Grid):
    from scipy.spatial import cKDTree

    return cKDTree(grid.nodes)


@lru_cache(maxsize=16)
def _lattice_table(grid: Grid):
    """Full-lattice array of node indices (-1 where the lattice point lies outside)."""
    lo = grid.lattice.min(axis=0)
    k = (grid.lattice - lo) // 2
    table = np.full(tuple(k.max(axis=0) + 1), -1, dtype=np.int64)
    table[k[:, 0], k[:, 1]] = np.arange(grid.n)
    origin = grid.nodes[0] - k[0] * grid.spacing
    return table, origin


def as_values(u, grid: Grid) -> np.ndarray:
    """Node values of a GridFn, array or scalar (None means 0)."""
    if u is None:
        return np.zeros(grid.n)
    if isinstance(u, GridFn):
        if not grid.same_as(u.grid):
            raise GridMismatch("grid function lives on a different grid")
        return np.asarray(u.values, dtype=float)
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 0:
        return np.full(grid.n, float(arr))
    if arr.shape != (grid.n,):
        raise GridMismatch(f"expected {grid.n} node values, got shape {arr.shape}")
    return arr


def boundary_ratio(u: GridFn, s: float) -> GridFn:
    """Node-wise u(x) / d(x)**s, with d the distance to the boundary."""
    d = u.grid.distances()
    return GridFn(u.grid, u.values / d**s)
