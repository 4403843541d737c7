"""Monte Carlo for the isotropic 2s-stable process killed on leaving the domain.

Paths are simulated in fixed-size batches. Batch ``k`` draws from a Philox
stream keyed by ``SeedSequence(seed, spawn_key=(k,))``, so results depend only
on the master seed and never on how batches are distributed over workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSurvivors
from .grid import Ball, Domain, Grid, GridFn, Interval, nearest_node

__all__ = [
    "PathSummary",
    "MCEstimate",
    "sample_stable_increment",
    "sample_positive_stable",
    "simulate_exit",
    "simulate_paths",
    "mean_exit_time",
    "fk_semigroup",
    "mc_principal_eigenvalue",
    "mc_duhamel_solution",
    "batch_rng",
]

BATCH_SIZE = 16384


@dataclass(frozen=True)
class PathSummary:
    exit_time: float
    censored: bool
    fk_integral: float
    survived_to: float
    final_position: np.ndarray


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n_paths: int
    seed: int

    def as_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n_paths": self.n_paths, "seed": self.seed}


def batch_rng(seed: int, batch: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(batch,))))


def _symmetric_stable(alpha: float, rng: np.random.Generator, size) -> np.ndarray:
    """Chambers-Mallows-Stuck draw with characteristic function exp(-|xi|^alpha)."""
    v = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, size)
    if alpha == 1.0:
        return np.tan(v)
    w = rng.standard_exponential(size)
    return (
        np.sin(alpha * v)
        / np.cos(v) ** (1.0 / alpha)
        * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha)
    )


def sample_positive_stable(s: float, rng: np.random.Generator, size=None) -> np.ndarray:
    """One-sided s-stable variable with E exp(-lam S) = exp(-lam^s) (Kanter's representation)."""
    u = rng.uniform(0.0, math.pi, size)
    e = rng.standard_exponential(size)
    return (
        np.sin(s * u)
        / np.sin(u) ** (1.0 / s)
        * (np.sin((1.0 - s) * u) / e) ** ((1.0 - s) / s)
    )


def sample_stable_increment(
    s: float, d: int, dt: float, rng: np.random.Generator, size=None, method: str | None = None
) -> np.ndarray:
    """Increment over time dt with characteristic function exp(-dt |xi|^{2s}).

    method "cms" (1D only) or "subordination" (sqrt(2 S) N(0, I_d) with S a
    one-sided s-stable time change); default is cms in 1D and subordination
    otherwise. Returns shape (d,) or (size, d).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    method = method or ("cms" if d == 1 else "subordination")
    shape = () if size is None else (size,)
    if method == "cms":
        if d != 1:
            raise ValueError("the CMS sampler is one-dimensional")
        x = _symmetric_stable(2.0 * s, rng, shape) * dt ** (1.0 / (2.0 * s))
        return np.asarray(x)[..., None]
    if method == "subordination":
        S = sample_positive_stable(s, rng, shape) * dt ** (1.0 / s)
        z = rng.standard_normal(shape + (d,))
        return np.sqrt(2.0 * S)[..., None] * z
    raise ValueError(f"unknown sampler {method!r}")


def _nearest_lookup(V, grid: Grid | None):
    if V is None:
        return None
    if np.ndim(V) == 0 and not isinstance(V, GridFn):
        c = float(V)
        return lambda x: np.full(x.shape[0], c)
    vals = np.asarray(V.values if isinstance(V, GridFn) else V, dtype=float)
    if grid is None:
        grid = V.grid
    return lambda x: vals[nearest_node(grid, x)]


def _field_lookup(f, grid: Grid | None):
    if f is None:
        return None
    if np.ndim(f) == 0 and not isinstance(f, GridFn):
        c = float(f)
        return lambda x: np.full(x.shape[0], c)
    if not isinstance(f, GridFn):
        f = GridFn(grid, f)
    return f.evaluate


def _inside(domain: Domain, x: np.ndarray) -> np.ndarray:
    if isinstance(domain, Interval):
        return (x > domain.a) & (x < domain.b)
    c = np.asarray(domain.center)
    return np.sum((x - c) ** 2, axis=1) < domain.radius**2


def _run_batch(
    batch: int,
    count: int,
    x0: np.ndarray,
    domain: Domain,
    s: float,
    dt: float,
    n_steps: int,
    seed: int,
    v_of,
    g_of,
    record_steps: np.ndarray,
):
    """Euler walk of `count` paths; exits are checked at multiples of dt."""
    rng = batch_rng(seed, batch)
    dim = domain.dim
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if dim == 1:
        pos = np.broadcast_to(x0, (count,)).copy()
    else:
        pos = np.broadcast_to(x0.reshape(-1, 2), (count, 2)).copy()
    alive = np.arange(count)
    exit_step = np.full(count, n_steps, dtype=np.int64)
    censored = np.ones(count, dtype=bool)
    fk = np.zeros(count)
    duh = np.zeros(count)
    surv = np.zeros((count, len(record_steps)))
    rec_pos = {int(k): j for j, k in enumerate(record_steps)}
    if 0 in rec_pos:
        surv[:, rec_pos[0]] = 1.0
    scale = dt ** (1.0 / (2.0 * s))
    cur = pos
    for step in range(n_steps):
        m = alive.size
        if m == 0:
            break
        vx = v_of(cur) if v_of is not None else None
        if g_of is not None:
            gx = g_of(cur)
            disc = np.exp(-fk[alive]) if vx is not None else 1.0
            duh[alive] += disc * gx * dt
        if vx is not None:
            fk[alive] += vx * dt
        if dim == 1:
            cur = cur + _symmetric_stable(2.0 * s, rng, m) * scale
        else:
            cur = cur + sample_stable_increment(s, 2, dt, rng, m, "subordination")
        ok = _inside(domain, cur)
        if not ok.all():
            gone = alive[~ok]
            exit_step[gone] = step + 1
            censored[gone] = False
            alive = alive[ok]
            cur = cur[ok]
        j = rec_pos.get(step + 1)
        if j is not None:
            surv[alive, j] = np.exp(-fk[alive])
    final = np.full((count,) if dim == 1 else (count, 2), np.nan)
    final[alive] = cur
    return exit_step, censored, fk, duh, surv, final


@dataclass(frozen=True)
class PathBatch:
    """Per-path outputs of simulate_paths, in path order."""

    exit_time: np.ndarray
    censored: np.ndarray
    fk_integral: np.ndarray
    duhamel: np.ndarray
    survival: np.ndarray
    final_position: np.ndarray
    record_times: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.exit_time.shape[0]


def simulate_paths(
    x0,
    domain: Domain,
    s: float,
    dt: float,
    t_max: float,
    n_paths: int,
    seed: int,
    V=None,
    g=None,
    grid: Grid | None = None,
    record_times=(),
    workers: int = 1,
    batch_size: int = BATCH_SIZE,
) -> PathBatch:
    """Simulate independent paths from x0 (a point, or one start point per path)."""
    if not 0 < dt < t_max + 1e-15:
        raise ValueError("need 0 < dt <= t_max")
    n_steps = int(round(t_max / dt))
    record_steps = np.array([int(round(t / dt)) for t in record_times], dtype=np.int64)
    v_of = _nearest_lookup(V, grid)
    g_of = _field_lookup(g, grid)
    x0 = np.asarray(x0, dtype=float)
    per_path = x0.ndim == domain.dim
    starts = list(range(0, n_paths, batch_size))

    def job(k):
        lo = starts[k]
        cnt = min(batch_size, n_paths - lo)
        start = x0[lo : lo + cnt] if per_path else x0
        return _run_batch(k, cnt, start, domain, s, dt, n_steps, seed, v_of, g_of, record_steps)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(job, range(len(starts))))
    else:
        parts = [job(k) for k in range(len(starts))]
    cat = [np.concatenate([p[i] for p in parts]) for i in range(6)]
    return PathBatch(
        exit_time=cat[0] * dt,
        censored=cat[1],
        fk_integral=cat[2],
        duhamel=cat[3],
        survival=cat[4],
        final_position=cat[5],
        record_times=np.asarray(record_times, dtype=float),
    )


def _estimate(samples: np.ndarray, seed: int) -> MCEstimate:
    n = samples.shape[0]
    mean = float(np.sum(samples) / n)
    stderr = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return MCEstimate(mean, stderr, n, seed)


def simulate_exit(x0, domain: Domain, s: float, dt: float, t_max: float, V=None, rng=0, grid=None) -> PathSummary:
    """Single path; `rng` is an integer seed."""
    b = simulate_paths(x0, domain, s, dt, t_max, 1, int(rng), V=V, grid=grid)
    t = float(b.exit_time[0])
    return PathSummary(t, bool(b.censored[0]), float(b.fk_integral[0]), t, b.final_position[0])


def mean_exit_time(x0, domain: Domain, s: float, dt: float, t_max: float, n_paths: int, seed: int, workers=1):
    b = simulate_paths(x0, domain, s, dt, t_max, n_paths, seed, workers=workers)
    return _estimate(b.exit_time, seed)


def fk_semigroup(x0, grid: Grid, V, f, t: float, n_paths: int, dt: float, seed: int, s: float, workers=1):
    """Estimate E^x[exp(-int_0^t V(X)) f(X_t) 1{tau > t}]."""
    fv = np.asarray(f.values if isinstance(f, GridFn) else f, dtype=float)
    if not np.any(fv):
        return MCEstimate(0.0, 0.0, n_paths, seed)
    b = simulate_paths(x0, grid.domain, s, dt, t, n_paths, seed, V=V, grid=grid, workers=workers)
    alive = b.censored
    weights = np.zeros(n_paths)
    if alive.any():
        f_at = _field_lookup(f, grid)(b.final_position[alive])
        weights[alive] = np.exp(-b.fk_integral[alive]) * f_at
    return _estimate(weights, seed)


def mc_principal_eigenvalue(
    x0,
    domain: Domain,
    s: float,
    t_window=(0.5, 2.5),
    n_paths: int = 20_000,
    dt: float = 1e-4,
    seed: int = 0,
    V=None,
    grid: Grid | None = None,
    n_times: int = 21,
    n_batches: int = 10,
    workers=1,
) -> MCEstimate:
    """Decay rate of t -> E^x[exp(-int V) 1{tau > t}] fitted by least squares on [t1, t2]."""
    t1, t2 = t_window
    if not 0 < t1 < t2:
        raise ValueError("need 0 < t1 < t2")
    times = np.linspace(t1, t2, n_times)
    b = simulate_paths(x0, domain, s, dt, t2, n_paths, seed, V=V, grid=grid, record_times=times, workers=workers)
    survivors = int(np.count_nonzero(b.censored))
    if survivors < 100:
        raise InsufficientSurvivors(f"only {survivors} of {n_paths} paths survive to t2={t2}")

    def slope(w):
        m = np.mean(w, axis=0)
        if np.any(m <= 0):
            return math.nan
        return -float(np.polyfit(times, np.log(m), 1)[0])

    est = slope(b.survival)
    groups = np.array_split(b.survival, n_batches)
    per = np.array([slope(g) for g in groups])
    stderr = float(np.nanstd(per, ddof=1) / math.sqrt(np.count_nonzero(~np.isnan(per))))
    return MCEstimate(est, stderr, n_paths, seed)


def mc_duhamel_solution(
    x0,
    grid: Grid,
    s: float,
    V,
    g,
    n_paths: int,
    dt: float,
    t_max: float,
    seed: int,
    workers=1,
) -> MCEstimate:
    """Estimate E^x[int_0^{tau ^ t_max} exp(-int_0^r V) g(X_r) dr]."""
    gv = np.asarray(g.values if isinstance(g, GridFn) else g, dtype=float)
    if not np.any(gv):
        return MCEstimate(0.0, 0.0, n_paths, seed)
    b = simulate_paths(x0, grid.domain, s, dt, t_max, n_paths, seed, V=V, g=g, grid=grid, workers=workers)
    return _estimate(b.duhamel, seed)
