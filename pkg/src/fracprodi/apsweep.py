"""Solvability in rho, threshold bisection, sweeps and a priori diagnostics.

"No solution" here is a numerical surrogate: the minimal iteration left its a
priori guard and no Newton start converged. Solution counts come from a
heuristic deflated search and may miss solutions.
"""
from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    APAssumptionError,
    BracketInvalid,
    GuardExceeded,
    MaxIterExceeded,
    MonotonicityViolated,
    PredicateInconsistent,
)
from .grid import GridFn
from .linear import abp_bound
from .semilinear import (
    APProblem,
    build_subsolution,
    build_supersolution,
    check_ap_assumptions,
    monotone_iteration,
    newton_deflated,
    residual,
    super_margin,
    INEQ_TOL,
)

__all__ = [
    "SolveBudget",
    "SweepRecord",
    "solvable",
    "find_rho_star",
    "RhoStarResult",
    "sweep",
    "apriori_check",
    "calibrate_superlinear",
    "scaling_check",
    "ScalingCheck",
    "records_to_csv",
    "NONEXISTENCE_NOTE",
]

NONEXISTENCE_NOTE = (
    "nonconvergent = minimal iteration exceeded its a priori guard and every Newton start failed "
    "(numerical surrogate for nonexistence)"
)

SOLVED_MINIMAL = "solved_minimal"
SOLVED_MULTIPLE = "solved_multiple"
NONCONVERGENT = "nonconvergent"
SUPER_INFEASIBLE = "supersolution_infeasible"


@dataclass(frozen=True)
class SolveBudget:
    tol: float = 1e-10
    max_iter: int = 10_000
    newton_starts: int = 12
    newton_tol: float = 1e-9
    max_newton: int = 60
    guard_factor: float = 10.0
    seed: int = 0


@dataclass
class SweepRecord:
    rho: float
    status: str
    minimal_sup_norm: float
    n_solutions_found: int
    diagnostics: dict = field(default_factory=dict)
    solutions: list = field(default_factory=list, repr=False)
    iterations: int = 0
    notes: list = field(default_factory=list)

    @property
    def solved(self) -> bool:
        return self.status.startswith("solved")

    @property
    def status_label(self) -> str:
        if self.status == SOLVED_MULTIPLE:
            return f"solved_multiple({self.n_solutions_found})"
        return self.status


# --------------------------------------------------------------------------- constants


def _kappa_hat(problem: APProblem) -> float:
    return problem.cached("kappa_V1", lambda: abp_bound(problem.op, -problem.V1))


def _kappa_zero(problem: APProblem) -> float:
    return problem.cached("kappa_0", lambda: abp_bound(problem.op, None))


def _rho_hat(rho: float) -> float:
    return max(-rho, 0.0)


def _negative_part_bound(problem: APProblem, rho_hat: float) -> float:
    sup_h = float(np.max(np.abs(problem.h)))
    return _kappa_hat(problem) * (problem.C_ap + rho_hat + sup_h)


def _growth_constant(problem: APProblem, rho_hat: float) -> float:
    """lambda0 (1 + C4 C5) with f(u) - h >= -C4 (1 + u^+) and C5 = ||A^{-1}||_inf."""
    sup_h = float(np.max(np.abs(problem.h)))
    v1_pos = float(np.max(np.maximum(problem.V1, 0.0)))
    v2_neg = float(np.max(np.maximum(-problem.V2, 0.0)))
    C4 = max(problem.C_ap + sup_h + v1_pos * _negative_part_bound(problem, rho_hat), v2_neg)
    return problem.lambda0 * (1.0 + C4 * _kappa_zero(problem))


def calibrate_superlinear(problem: APProblem, rho: float = 0.0, budget: SolveBudget | None = None) -> float:
    """C0_hat = largest sup|u| over the solutions found at the calibration rho (at least 1)."""

    def compute():
        rec = solvable(problem.with_rho(rho), budget, _calibrating=True)
        scale = max(1.0, abs(rho) ** (1.0 / problem.f.exponent))
        return max([1.0] + [u.sup_norm() / scale for u in rec.solutions])

    return problem.cached(("C0_hat", rho), compute)


def _guard(problem: APProblem, budget: SolveBudget, calibrating: bool) -> float:
    sup_h = float(np.max(np.abs(problem.h)))
    linear = budget.guard_factor * _kappa_hat(problem) * (problem.C_ap + abs(problem.rho) + sup_h + 1.0)
    if not problem.superlinear or calibrating:
        return linear
    C0 = calibrate_superlinear(problem, 0.0, budget)
    return max(linear, budget.guard_factor * C0 * max(1.0, abs(problem.rho) ** (1.0 / problem.f.exponent)))


# --------------------------------------------------------------------------- solvability


def _core_check(problem: APProblem):
    report = problem.cached("ap_report", lambda: check_ap_assumptions(problem))
    if not report.core_passed:
        failed = [c.name for c in report.checks if not c.passed]
        raise APAssumptionError(f"assumption checks failed: {failed}")
    return report


def solvable(problem: APProblem, budget: SolveBudget | None = None, _calibrating: bool = False) -> SweepRecord:
    """Decide solvability at problem.rho and count the solutions found."""
    budget = budget or SolveBudget()
    _core_check(problem)
    grid = problem.grid
    u_lower = build_subsolution(problem)
    upper = None
    sup = build_supersolution(problem)
    if sup.feasible:
        upper = sup.u_bar
    elif super_margin(problem, np.zeros(grid.n)) >= -INEQ_TOL:
        # the zero function is a supersolution whenever rho phi1 + h <= 0
        upper = grid.zeros()
    guard = _guard(problem, budget, _calibrating)
    notes = []
    try:
        it = monotone_iteration(
            problem, u_lower, upper, tol=budget.tol, max_iter=budget.max_iter, guard=guard
        )
    except (GuardExceeded, MaxIterExceeded, MonotonicityViolated) as exc:
        status = NONCONVERGENT
        if isinstance(exc, MaxIterExceeded) and upper is None:
            status = SUPER_INFEASIBLE
        notes.append(f"{type(exc).__name__}: {exc}")
        stray = newton_deflated(
            problem, (), budget.newton_starts, budget.newton_tol, budget.max_newton, budget.seed
        )
        if not stray:
            rec = SweepRecord(problem.rho, status, math.nan, 0, notes=notes)
            rec.diagnostics = apriori_check(rec, problem)
            return rec
        notes.append("iteration failed but Newton found a solution")
        warnings.warn(f"rho={problem.rho}: minimal iteration failed while Newton converged", RuntimeWarning)
        sols = sorted(stray, key=lambda u: float(np.sum(u.values)))
        rec = SweepRecord(
            problem.rho,
            SOLVED_MULTIPLE if len(sols) > 1 else SOLVED_MINIMAL,
            sols[0].sup_norm(),
            len(sols),
            solutions=sols,
            notes=notes,
        )
        rec.diagnostics = apriori_check(rec, problem)
        return rec
    u_min = it.solution
    others = newton_deflated(
        problem, [u_min], budget.newton_starts, budget.newton_tol, budget.max_newton, budget.seed
    )
    sols = [u_min] + others
    status = SOLVED_MULTIPLE if len(sols) > 1 else SOLVED_MINIMAL
    rec = SweepRecord(problem.rho, status, u_min.sup_norm(), len(sols), solutions=sols, iterations=it.iters, notes=notes)
    rec.diagnostics = apriori_check(rec, problem)
    rec.diagnostics["minimal_residual"] = it.residual
    rec.diagnostics["monotone_certificate"] = it.monotone_certificate
    if others:
        rec.diagnostics["minimality_margin"] = min(float(np.min(o.values - u_min.values)) for o in others)
    return rec


def apriori_check(record: SweepRecord, problem: APProblem) -> dict:
    """Margins (bound minus measured value; >= 0 means the bound holds) of the a priori estimates."""
    rho = record.rho
    rho_hat = _rho_hat(rho)
    out = {
        "kappa_hat": _kappa_hat(problem),
        "sup_u_minus": math.nan,
        "bound_margin_L35": math.nan,
        "bound_margin_L36": math.nan,
    }
    if not record.solutions:
        return out
    sup_minus = max(float(np.max(np.maximum(-u.values, 0.0))) for u in record.solutions)
    sup_plus = [float(np.max(np.maximum(u.values, 0.0))) for u in record.solutions]
    C3 = _growth_constant(problem, rho_hat)
    out["sup_u_minus"] = sup_minus
    out["bound_margin_L35"] = _negative_part_bound(problem, rho_hat) - sup_minus
    out["C3_hat"] = C3
    out["bound_margin_L36"] = min(C3 * (1.0 + sp) for sp in sup_plus) - max(rho, 0.0)
    out["max_residual"] = max(residual(problem, u).sup_norm() for u in record.solutions)
    if problem.superlinear:
        C0 = problem.cache.get(("C0_hat", 0.0))
        out["sup_u_plus"] = max(sup_plus)
        out["sup_abs_u"] = _max_sup_norm(record)
        if C0 is not None:
            scale = max(1.0, abs(rho) ** (1.0 / problem.f.exponent))
            out["C0_hat"] = C0
            out["bound_margin_growth"] = C0 * scale - out["sup_abs_u"]
    return out


def _max_sup_norm(record: SweepRecord) -> float:
    return max(u.sup_norm() for u in record.solutions)


@dataclass(frozen=True)
class ScalingCheck:
    measured: float
    predicted: float
    factor: float

    @property
    def within_factor(self) -> float:
        return max(self.measured / self.predicted, self.predicted / self.measured)

    @property
    def passed(self) -> bool:
        return self.within_factor <= self.factor


def scaling_check(rec_a: SweepRecord, rec_b: SweepRecord, p: float, factor: float = 2.0) -> ScalingCheck:
    """Two-point test of sup|u| ~ |rho|^(1/p): ratio of the largest sup-norms over all
    solutions found at rho_b and rho_a against (|rho_b| / |rho_a|)^(1/p)."""
    if not (rec_a.solutions and rec_b.solutions):
        raise ValueError("both records need at least one solution")
    measured = _max_sup_norm(rec_b) / _max_sup_norm(rec_a)
    predicted = (max(1.0, abs(rec_b.rho)) / max(1.0, abs(rec_a.rho))) ** (1.0 / p)
    return ScalingCheck(measured, predicted, factor)


# --------------------------------------------------------------------------- threshold and sweep


@dataclass(frozen=True)
class RhoStarResult:
    rho_star: float
    lo: float
    hi: float
    evaluations: tuple
    records: tuple = field(default=(), repr=False)

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _consistent(evals):
    yes = [r for r, ok in evals if ok]
    no = [r for r, ok in evals if not ok]
    return not yes or not no or max(yes) < min(no)


def find_rho_star(
    problem: APProblem,
    bracket,
    tol_rho: float = 1e-2,
    budget: SolveBudget | None = None,
    verify: bool = True,
) -> RhoStarResult:
    """Bisection on the solvability predicate down to a bracket of width <= tol_rho.

    With `verify` the predicate is re-evaluated at rho* -/+ tol_rho afterwards; every
    evaluation, these included, must be consistent with a downward-closed solvable set.
    """
    lo, hi = (float(b) for b in bracket)
    if not lo < hi:
        raise BracketInvalid(f"bracket [{lo}, {hi}] is empty")
    evals = []
    records = []

    def pred(r):
        rec = solvable(problem.with_rho(r), budget)
        ok = rec.solved
        records.append(rec)
        evals.append((r, ok))
        if not _consistent(evals):
            raise PredicateInconsistent(
                f"solvable rho above an unsolvable one in {sorted(evals)}; rerun on a finer grid"
            )
        return ok

    if not pred(lo):
        raise BracketInvalid(f"rho_lo={lo} is not solvable")
    if pred(hi):
        raise BracketInvalid(f"rho_hi={hi} is solvable")
    while hi - lo > tol_rho:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    rho_star = 0.5 * (lo + hi)
    if verify:
        pred(rho_star - tol_rho)
        pred(rho_star + tol_rho)
    return RhoStarResult(rho_star, lo, hi, tuple(evals), tuple(records))


def _count_class(rec: SweepRecord) -> int:
    if not rec.solved:
        return 0
    return 2 if rec.n_solutions_found >= 2 else 1


def sweep(problem: APProblem, rhos, budget: SolveBudget | None = None) -> list:
    """solvable() at each rho, in the given order; count-pattern violations only warn."""
    records = [solvable(problem.with_rho(float(r)), budget) for r in rhos]
    ordered = sorted(records, key=lambda r: r.rho)
    classes = [_count_class(r) for r in ordered]
    for a, b, ra, rb in zip(classes, classes[1:], ordered, ordered[1:]):
        if b > a:
            msg = f"solution count rises from rho={ra.rho} to rho={rb.rho}; Newton counting may have missed solutions"
            rb.notes.append(msg)
            warnings.warn(msg, RuntimeWarning)
    return records


CSV_COLUMNS = (
    "rho",
    "status",
    "n_solutions",
    "minimal_sup_norm",
    "sup_u_minus",
    "bound_margin_L35",
    "bound_margin_L36",
)


def records_to_csv(records, path=None, header_lines=()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in records:
        d = r.diagnostics
        row = [
            f"{r.rho:.17g}",
            r.status_label,
            str(r.n_solutions_found),
            f"{r.minimal_sup_norm:.17g}",
            f"{d.get('sup_u_minus', math.nan):.17g}",
            f"{d.get('bound_margin_L35', math.nan):.17g}",
            f"{d.get('bound_margin_L36', math.nan):.17g}",
        ]
        buf.write(",".join(row) + "\n")
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
