"""Semilinear exterior-value problem A u = f(x, u) + rho * phi1 + h.

Holds the nonlinearity families, the assumption checker, the sub/supersolution
construction, the monotone iteration to the minimal solution and a deflated
semismooth Newton search for further solutions.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, lu_factor, lu_solve

from .errors import (
    EigenvaluePreconditionFailed,
    EmptyInterval,
    GuardExceeded,
    MaxIterExceeded,
    MonotonicityViolated,
    PreconditionNotMet,
    SubsolutionInequalityViolated,
)
from .fraclap import DiscreteOp
from .grid import GridFn, as_values
from .linear import LinearSolver
from .spectral import principal_eigenpair, principal_eigenvalue

__all__ = [
    "Nonlinearity",
    "JumpingLinear",
    "PowerAP",
    "Tabulated",
    "eval_nonlinearity",
    "lipschitz_constant",
    "APProblem",
    "make_problem",
    "APCheck",
    "APReport",
    "check_ap_assumptions",
    "build_subsolution",
    "build_supersolution",
    "SupersolutionResult",
    "monotone_iteration",
    "IterationResult",
    "newton_deflated",
    "residual",
    "sub_margin",
    "super_margin",
]

INEQ_TOL = 1e-8
MONO_TOL = 1e-10


# --------------------------------------------------------------------------- nonlinearities


class Nonlinearity:
    """f(x, q) evaluated node-wise; subclasses enforce f(x, 0) = 0."""

    family: str = ""

    def __call__(self, q, node=None) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, q, node=None) -> np.ndarray:
        raise NotImplementedError

    def lipschitz(self, m: float, M: float) -> float:
        raise NotImplementedError

    def growth_constant(self) -> float:
        """C1 with f(x, q) <= C1 (1 + q^p) for q >= 0 (p = 1 for linear growth)."""
        raise NotImplementedError

    @property
    def exponent(self) -> float:
        return 1.0

    def params(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class JumpingLinear(Nonlinearity):
    """f(q) = mu_plus * q for q >= 0 and mu_minus * q for q < 0."""

    mu_minus: float
    mu_plus: float
    family = "jumping_linear"

    def __call__(self, q, node=None):
        q = np.asarray(q, dtype=float)
        return np.where(q >= 0, self.mu_plus * q, self.mu_minus * q)

    def derivative(self, q, node=None):
        # tie-break at q = 0 takes the mu_plus branch
        q = np.asarray(q, dtype=float)
        return np.where(q >= 0, self.mu_plus, self.mu_minus)

    def lipschitz(self, m, M):
        if m > M:
            raise EmptyInterval(f"empty interval [{m}, {M}]")
        return max(abs(self.mu_minus), abs(self.mu_plus))

    def growth_constant(self):
        return max(self.mu_plus, 1.0)

    def params(self):
        return {"family": self.family, "mu_minus": self.mu_minus, "mu_plus": self.mu_plus}


@dataclass(frozen=True, eq=False)
class PowerAP(Nonlinearity):
    """f(q) = a0 q^p for q >= 0 and slope_neg * q for q < 0; a0 may vary by node."""

    a0: object
    p: float
    slope_neg: float
    family = "power_ap"

    def _a0(self, node):
        a0 = np.asarray(self.a0, dtype=float)
        if a0.ndim == 0 or node is None:
            return a0
        return a0[node]

    def __call__(self, q, node=None):
        q = np.asarray(q, dtype=float)
        qp = np.maximum(q, 0.0)
        return np.where(q >= 0, self._a0(node) * qp**self.p, self.slope_neg * q)

    def derivative(self, q, node=None):
        q = np.asarray(q, dtype=float)
        qp = np.maximum(q, 0.0)
        return np.where(q >= 0, self.p * self._a0(node) * qp ** (self.p - 1), self.slope_neg)

    def lipschitz(self, m, M):
        if m > M:
            raise EmptyInterval(f"empty interval [{m}, {M}]")
        a_max = float(np.max(self.a0))
        top = max(abs(m), abs(M)) if M > 0 else 0.0
        return max(abs(self.slope_neg), self.p * a_max * top ** (self.p - 1))

    def growth_constant(self):
        return float(np.max(self.a0))

    @property
    def exponent(self):
        return self.p

    def params(self):
        a0 = np.asarray(self.a0, dtype=float)
        return {
            "family": self.family,
            "a0": float(a0) if a0.ndim == 0 else a0.tolist(),
            "p": self.p,
            "slope_neg": self.slope_neg,
        }


@dataclass(frozen=True, eq=False)
class Tabulated(Nonlinearity):
    """Piecewise-linear interpolation of samples, extended linearly beyond the table."""

    q: np.ndarray
    f: np.ndarray
    family = "tabulated"

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        f = np.asarray(self.f, dtype=float)
        if q.ndim != 1 or q.shape != f.shape or q.size < 2 or np.any(np.diff(q) <= 0):
            raise ValueError("tabulated nonlinearity needs increasing sample points and matching values")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "f", f)
        if not q[0] <= 0 <= q[-1] or abs(self._eval(np.array(0.0))) > 1e-14:
            raise ValueError("tabulated nonlinearity must satisfy f(0) = 0")

    @property
    def _slopes(self):
        return np.diff(self.f) / np.diff(self.q)

    def _eval(self, q):
        out = np.interp(q, self.q, self.f)
        sl = self._slopes
        out = np.where(q < self.q[0], self.f[0] + sl[0] * (q - self.q[0]), out)
        return np.where(q > self.q[-1], self.f[-1] + sl[-1] * (q - self.q[-1]), out)

    def __call__(self, q, node=None):
        return self._eval(np.asarray(q, dtype=float))

    def derivative(self, q, node=None):
        q = np.asarray(q, dtype=float)
        k = np.clip(np.searchsorted(self.q, q, side="right") - 1, 0, self.q.size - 2)
        return self._slopes[k]

    def lipschitz(self, m, M):
        if m > M:
            raise EmptyInterval(f"empty interval [{m}, {M}]")
        return float(np.max(np.abs(self._slopes)))

    def growth_constant(self):
        pos = self.q >= 0
        ratio = np.max(np.maximum(self.f[pos], 0.0) / (1.0 + self.q[pos]))
        return float(max(1.0, ratio, self._slopes[-1]))

    def params(self):
        return {"family": self.family, "q": self.q.tolist(), "f": self.f.tolist()}


def eval_nonlinearity(f: Nonlinearity, node: int, q: float) -> float:
    return float(f(q, node))


def lipschitz_constant(f: Nonlinearity, m: float, M: float) -> float:
    return f.lipschitz(m, M)


# --------------------------------------------------------------------------- problem data


@dataclass(frozen=True, eq=False)
class APProblem:
    op: DiscreteOp
    f: Nonlinearity
    h: np.ndarray
    rho: float
    phi1: GridFn
    lambda0: float
    V1: np.ndarray
    V2: np.ndarray
    C_ap: float
    # factorisations and constants shared by every rho of one family
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def grid(self):
        return self.op.grid

    def with_rho(self, rho: float) -> "APProblem":
        return dataclasses.replace(self, rho=float(rho))

    def with_h(self, h) -> "APProblem":
        return dataclasses.replace(self, h=as_values(h, self.grid), cache={})

    @property
    def forcing(self) -> np.ndarray:
        return self.rho * self.phi1.values + self.h

    def cached(self, key, compute):
        if key not in self.cache:
            self.cache[key] = compute()
        return self.cache[key]

    @property
    def superlinear(self) -> bool:
        return self.f.exponent > 1.0


def make_problem(op: DiscreteOp, f: Nonlinearity, rho: float = 0.0, h=None, V1=None, V2=None, C_ap=None):
    """Assemble problem data; V1, V2 and C_ap default per family when omitted."""
    eig = principal_eigenpair(op)
    lam0 = eig.lambda_star
    grid = op.grid
    if isinstance(f, JumpingLinear):
        V1 = f.mu_minus if V1 is None else V1
        V2 = f.mu_plus if V2 is None else V2
        C_ap = 0.0 if C_ap is None else C_ap
    elif isinstance(f, PowerAP):
        V1 = f.slope_neg if V1 is None else V1
        V2 = 2.0 * lam0 if V2 is None else V2
        if C_ap is None:
            # a0 q^p >= V2 q - C on q >= 0, minimised over q
            a0 = np.broadcast_to(np.asarray(f.a0, dtype=float), (grid.n,))
            v2 = as_values(V2, grid)
            p = f.p
            qstar = (np.maximum(v2, 0) / (p * a0)) ** (1.0 / (p - 1))
            C_ap = float(np.max(v2 * qstar - a0 * qstar**p))
    elif V1 is None or V2 is None or C_ap is None:
        raise PreconditionNotMet("tabulated nonlinearities need explicit V1, V2 and C_ap")
    return APProblem(
        op=op,
        f=f,
        h=as_values(h, grid),
        rho=float(rho),
        phi1=eig.psi,
        lambda0=lam0,
        V1=as_values(V1, grid),
        V2=as_values(V2, grid),
        C_ap=float(C_ap),
    )


def residual(problem: APProblem, u) -> GridFn:
    """Node-wise A u - f(x, u) - rho phi1 - h."""
    u = as_values(u, problem.grid)
    r = problem.op.matrix @ u - problem.f(u) - problem.forcing
    return GridFn(problem.grid, r)


def sub_margin(problem: APProblem, u) -> float:
    """min over nodes of f(u) + rho phi1 + h - A u (>= 0 for a subsolution)."""
    return float(-np.max(residual(problem, u).values))


def super_margin(problem: APProblem, u) -> float:
    """min over nodes of A u - f(u) - rho phi1 - h (>= 0 for a supersolution)."""
    return float(np.min(residual(problem, u).values))


# --------------------------------------------------------------------------- assumption checks


@dataclass(frozen=True)
class APCheck:
    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass(frozen=True)
class APReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def core_passed(self) -> bool:
        """The sign and lower-bound conditions the sub/supersolution construction relies on."""
        core = {"f_zero", "AP1_lower", "AP1_upper", "AP2", "AP3"}
        return all(c.passed for c in self.checks if c.name in core)

    def __getitem__(self, name) -> APCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def check_ap_assumptions(problem: APProblem, Q: float = 100.0, nq: int = 2001) -> APReport:
    op, f = problem.op, problem.f
    checks = []
    f0 = float(np.max(np.abs(f(np.zeros(problem.grid.n)))))
    checks.append(APCheck("f_zero", f0 == 0.0, -f0, "f(x, 0) = 0"))

    lam1 = problem.cached("lambda_V1", lambda: principal_eigenvalue(op, -problem.V1))
    lam2 = principal_eigenvalue(op, -problem.V2)
    checks.append(APCheck("AP1_lower", lam1 > 0, lam1, "lambda*(A - V1) > 0"))
    checks.append(APCheck("AP1_upper", lam2 < 0, -lam2, "lambda*(A - V2) < 0"))

    qs_neg = np.linspace(-Q, 0.0, nq)
    qs_pos = np.linspace(0.0, Q, nq)
    m2 = min(float(np.min(f(q * np.ones(problem.grid.n)) - (problem.V1 * q - problem.C_ap))) for q in qs_neg)
    m3 = min(float(np.min(f(q * np.ones(problem.grid.n)) - (problem.V2 * q - problem.C_ap))) for q in qs_pos)
    checks.append(APCheck("AP2", m2 >= -1e-12, m2, "f >= V1 q - C on [-Q, 0]"))
    checks.append(APCheck("AP3", m3 >= -1e-12, m3, "f >= V2 q - C on [0, Q]"))

    d, s = problem.grid.dim, op.s
    if problem.superlinear:
        p = f.exponent
        upper = (d + 2 * s) / (d - 2 * s) if d > 2 * s else math.inf
        ok = d > 1 + 2 * s and 1 < p < upper
        checks.append(
            APCheck("exponent_window", ok, min(d - 1 - 2 * s, upper - p, p - 1), f"d > 1+2s and 1 < p < {upper:.6g}")
        )
    else:
        qs = np.concatenate([qs_neg, qs_pos])
        ratio = max(float(np.max(np.abs(f(q * np.ones(problem.grid.n))))) / (1 + abs(q)) for q in qs)
        checks.append(APCheck("linear_growth", math.isfinite(ratio), ratio, "|f| <= C (1 + |q|)"))
    return APReport(tuple(checks))


# --------------------------------------------------------------------------- sub / supersolutions


def _shifted_solver(problem: APProblem) -> LinearSolver:
    def make():
        lam = problem.cached("lambda_V1", lambda: principal_eigenvalue(problem.op, -problem.V1))
        if lam <= 0:
            raise EigenvaluePreconditionFailed(f"lambda*(A - V1) = {lam:.6g} is not positive")
        return LinearSolver(problem.op, -problem.V1, lambda_star=lam)

    return problem.cached("solver_V1", make)


def _plain_solver(problem: APProblem) -> LinearSolver:
    return problem.cached("solver_0", lambda: LinearSolver(problem.op, None))


def build_subsolution(problem: APProblem) -> GridFn:
    """Solve (A - V1) u = -C2 + h + rho phi1 with C2 = 2 sup|h| + 2|rho| + C."""
    solver = _shifted_solver(problem)
    C2 = 2 * float(np.max(np.abs(problem.h))) + 2 * abs(problem.rho) + problem.C_ap
    u = solver.solve(-C2 + problem.forcing)
    if np.max(u.values) > 1e-10:
        raise SubsolutionInequalityViolated(f"subsolution is positive somewhere (max {np.max(u.values):.3e})")
    margin = sub_margin(problem, u)
    if margin < -INEQ_TOL:
        raise SubsolutionInequalityViolated(
            f"subsolution inequality fails by {-margin:.3e}; refine the grid"
        )
    return u


@dataclass(frozen=True)
class SupersolutionResult:
    u_bar: GridFn
    feasible: bool
    margin: float


def build_supersolution(problem: APProblem) -> SupersolutionResult:
    """Solve A u = h^+ + C1 and report whether u is a supersolution at the problem's rho."""
    C1 = problem.f.growth_constant()
    u = _plain_solver(problem).solve(np.maximum(problem.h, 0.0) + C1)
    margin = super_margin(problem, u)
    return SupersolutionResult(u, margin >= -INEQ_TOL, margin)


# --------------------------------------------------------------------------- monotone iteration


@dataclass
class IterationResult:
    solution: GridFn
    iters: int
    theta: float
    residual: float
    min_increment: float
    max_excess: float
    history: list = field(default_factory=list)
    mono_tol: float = MONO_TOL

    @property
    def monotone_certificate(self) -> bool:
        return self.min_increment >= -self.mono_tol and self.max_excess <= self.mono_tol


def monotone_iteration(
    problem: APProblem,
    u_lower,
    u_upper=None,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    guard: float | None = None,
    check_inputs: bool = True,
) -> IterationResult:
    """Iterate (A + theta I) u_{n+1} = f(u_n) + rho phi1 + h + theta u_n from u_lower.

    With `u_upper` the Lipschitz shift theta is taken on [min u_lower, max u_upper];
    without it theta grows with the iterates, which keeps the sequence monotone.
    `guard` caps max(u_n): exceeding it raises GuardExceeded.
    """
    grid = problem.grid
    A = problem.op.matrix
    lo = as_values(u_lower, grid)
    hi = None if u_upper is None else as_values(u_upper, grid)
    if check_inputs:
        if sub_margin(problem, lo) < -INEQ_TOL:
            raise PreconditionNotMet("u_lower is not a subsolution")
        if hi is not None:
            if super_margin(problem, hi) < -INEQ_TOL:
                raise PreconditionNotMet("u_upper is not a supersolution")
            if np.any(lo > hi + MONO_TOL):
                raise PreconditionNotMet("u_lower must lie below u_upper")
    m = float(lo.min())
    if hi is not None:
        top = float(hi.max())
    else:
        top = max(float(lo.max()), 0.0)
    theta = problem.f.lipschitz(m, top)
    eye = np.eye(grid.n)
    factor = cho_factor(A + theta * eye)
    forcing = problem.forcing
    u = lo.copy()
    history = []
    min_inc = math.inf
    max_excess = -math.inf
    scale_tol = MONO_TOL * max(1.0, float(np.max(np.abs(lo))))
    for it in range(1, max_iter + 1):
        if hi is None and float(u.max()) > top:
            top = 2.0 * float(u.max())
            new_theta = problem.f.lipschitz(m, top)
            if new_theta > theta:
                theta = new_theta
                factor = cho_factor(A + theta * eye)
        u_new = cho_solve(factor, problem.f(u) + forcing + theta * u)
        delta = u_new - u
        inc = float(np.max(np.abs(delta)))
        min_inc = min(min_inc, float(delta.min()))
        if delta.min() < -scale_tol:
            raise MonotonicityViolated(f"iterate {it} decreased by {-delta.min():.3e}")
        if hi is not None:
            excess = float(np.max(u_new - hi))
            max_excess = max(max_excess, excess)
            if excess > scale_tol:
                raise MonotonicityViolated(f"iterate {it} exceeds the supersolution by {excess:.3e}")
        u = u_new
        if guard is not None and float(u.max()) > guard:
            raise GuardExceeded(f"iterate {it} reached max {u.max():.4g} > guard {guard:.4g}")
        res = float(np.max(np.abs(A @ u - problem.f(u) - forcing)))
        history.append((it, res, inc))
        if inc <= tol and (res <= 10 * tol or inc == 0.0):
            return IterationResult(GridFn(grid, u), it, theta, res, min_inc, max_excess, history, scale_tol)
    raise MaxIterExceeded(f"monotone iteration did not converge in {max_iter} iterations")


# --------------------------------------------------------------------------- deflated Newton


def _l2(v, grid) -> float:
    return math.sqrt(grid.cell_volume * float(v @ v))


def _newton_solve(problem, u, known, tol, max_newton, blowup=1e8, stall=12):
    grid = problem.grid
    A = problem.op.matrix
    forcing = problem.forcing
    w = grid.cell_volume
    best, since_best = math.inf, 0
    for _ in range(max_newton):
        G = A @ u - problem.f(u) - forcing
        res = float(np.max(np.abs(G)))
        if res <= tol:
            return u
        # give up on starts that wander without halving the residual
        if res < 0.5 * best:
            best, since_best = res, 0
        else:
            since_best += 1
            if since_best >= stall:
                return None
        J = A - np.diag(problem.f.derivative(u))
        try:
            delta = -lu_solve(lu_factor(J, check_finite=True), G)
        except (LinAlgError, ValueError):
            return None
        if not np.all(np.isfinite(delta)):
            return None
        # deflation M(u) = prod_k (1/||u - u_k||^2 + 1) rescales the Newton step
        glog = np.zeros_like(u)
        for uk in known:
            e = u - uk
            r2 = w * float(e @ e)
            if r2 == 0.0:
                return None
            glog += (-2.0 * w * e / r2**2) / (1.0 / r2 + 1.0)
        denom = 1.0 - float(glog @ delta)
        tau = 1.0 / denom if abs(denom) > 1e-12 else 1.0
        u = u + tau * delta
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > blowup:
            return None
    G = A @ u - problem.f(u) - forcing
    return u if float(np.max(np.abs(G))) <= tol else None


def newton_deflated(
    problem: APProblem,
    known=(),
    n_starts: int = 12,
    tol: float = 1e-9,
    max_newton: int = 60,
    seed: int = 0,
) -> list:
    """Solutions distinct from `known` found by deflated semismooth Newton.

    Starts are base + c * phi1 for c on a geometric ladder of both signs
    (base = first known solution or 0), then random perturbations of base.
    """
    grid = problem.grid
    phi = problem.phi1.values
    roots = [as_values(k, grid) for k in known]
    base = roots[0] if roots else np.zeros(grid.n)
    scale = max(1.0, float(np.max(np.abs(base))))
    n_ladder = max(0, n_starts - max(2, n_starts // 4))
    ladder = []
    for k in range(n_ladder):
        c = scale * 0.25 * 3.0 ** (k // 2)
        ladder.append(c if k % 2 == 0 else -c)
    rng = np.random.default_rng(seed)
    starts = [base + c * phi for c in ladder]
    for _ in range(n_starts - len(starts)):
        starts.append(base + scale * phi * rng.uniform(-2.0, 4.0, grid.n))
    found = []
    for u0 in starts:
        u = _newton_solve(problem, u0.copy(), roots, tol, max_newton)
        if u is None:
            continue
        if any(np.max(np.abs(u - r)) <= 100 * tol for r in roots):
            continue
        roots.append(u)
        found.append(GridFn(grid, u))
    return found
