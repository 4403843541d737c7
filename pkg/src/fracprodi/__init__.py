"""Fractional Laplacian Dirichlet problems, Feynman-Kac Monte Carlo and Ambrosetti-Prodi sweeps."""

__version__ = "0.1.0"

from .grid import Ball, Grid, GridFn, Interval, make_ball_grid, make_interval_grid
from .fraclap import DiscreteOp, assemble, fcd_weights, normalizing_constant
from .linear import abp_bound, check_comparison, solve_dirichlet
from .spectral import principal_eigenpair, principal_eigenvalue, spectral_gap
from .semilinear import (
    JumpingLinear,
    PowerAP,
    Tabulated,
    build_subsolution,
    build_supersolution,
    check_ap_assumptions,
    make_problem,
    monotone_iteration,
    newton_deflated,
)
from .apsweep import apriori_check, find_rho_star, solvable, sweep

__all__ = [
    "Ball",
    "Grid",
    "GridFn",
    "Interval",
    "make_ball_grid",
    "make_interval_grid",
    "DiscreteOp",
    "assemble",
    "fcd_weights",
    "normalizing_constant",
    "abp_bound",
    "check_comparison",
    "solve_dirichlet",
    "principal_eigenpair",
    "principal_eigenvalue",
    "spectral_gap",
    "JumpingLinear",
    "PowerAP",
    "Tabulated",
    "build_subsolution",
    "build_supersolution",
    "check_ap_assumptions",
    "make_problem",
    "monotone_iteration",
    "newton_deflated",
    "apriori_check",
    "find_rho_star",
    "solvable",
    "sweep",
]
