import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracprodi.errors import EmptyInterval, PreconditionNotMet
from fracprodi.fraclap import assemble
from fracprodi.grid import make_ball_grid, make_interval_grid
from fracprodi.semilinear import (
    JumpingLinear,
    PowerAP,
    Tabulated,
    build_subsolution,
    build_supersolution,
    check_ap_assumptions,
    eval_nonlinearity,
    lipschitz_constant,
    make_problem,
    monotone_iteration,
    newton_deflated,
    residual,
    sub_margin,
)

JUMP = JumpingLinear(0.5, 2.5)


@pytest.fixture(scope="module")
def family():
    op = assemble(make_interval_grid(-1, 1, 200), 0.5)
    return make_problem(op, JUMP)


def exact_pair(P, rho):
    """For h = 0 and rho < 0 the jumping problem has exactly the solutions rho phi1 / (lambda0 - mu)."""
    phi = P.phi1.values
    return rho * phi / (P.lambda0 - JUMP.mu_minus), rho * phi / (P.lambda0 - JUMP.mu_plus)


def test_nonlinearity_values():
    assert eval_nonlinearity(JUMP, 0, -2.0) == -1.0
    assert eval_nonlinearity(JUMP, 0, 0.0) == 0.0
    assert eval_nonlinearity(PowerAP(1.0, 2.0, 0.5), 0, 3.0) == 9.0
    assert eval_nonlinearity(PowerAP(1.0, 2.0, 0.5), 0, -2.0) == -1.0


def test_lipschitz_constants():
    assert lipschitz_constant(JUMP, -1, 2) == 2.5
    assert lipschitz_constant(PowerAP(1.0, 2.0, 0.5), 0, 3) == 6.0
    with pytest.raises(EmptyInterval):
        lipschitz_constant(JUMP, 2, -1)


def test_tabulated_nonlinearity():
    f = Tabulated([-1.0, 0.0, 1.0, 2.0], [-0.5, 0.0, 2.0, 5.0])
    np.testing.assert_allclose(f(np.array([-2.0, 0.5, 3.0])), [-1.0, 1.0, 8.0])
    np.testing.assert_allclose(f.derivative(np.array([-0.5, 0.5, 2.5])), [0.5, 2.0, 3.0])
    with pytest.raises(ValueError):
        Tabulated([-1.0, 1.0], [1.0, 2.0])


@settings(max_examples=60, deadline=None)
@given(q1=st.floats(-50, 50), q2=st.floats(-50, 50))
def test_jumping_lipschitz_bound_holds(q1, q2):
    L = lipschitz_constant(JUMP, min(q1, q2), max(q1, q2))
    assert abs(JUMP(q1) - JUMP(q2)) <= L * abs(q1 - q2) + 1e-12


def test_checker_on_jumping_family(family):
    rep = check_ap_assumptions(family)
    assert rep.passed
    assert family.lambda0 == pytest.approx(1.158, rel=5e-3)


def test_checker_rejects_large_v1(family):
    P = make_problem(family.op, JUMP, V1=2.0)
    rep = check_ap_assumptions(P)
    assert not rep["AP1_lower"].passed
    assert not rep.core_passed


def test_checker_exponent_window():
    op = assemble(make_ball_grid(1.0, 11), 0.25)
    ok = check_ap_assumptions(make_problem(op, PowerAP(1.0, 1.5, 0.5)))
    assert ok["exponent_window"].passed
    bad = check_ap_assumptions(make_problem(op, PowerAP(1.0, 2.0, 0.5)))
    # (d + 2s) / (d - 2s) = 5/3 < 2
    assert not bad["exponent_window"].passed
    assert bad.core_passed


def test_subsolution_properties(family):
    # zero data (C = 0, rho = 0, h = 0) gives the zero subsolution
    assert build_subsolution(family).sup_norm() == 0.0
    P = make_problem(family.op, JUMP, C_ap=0.1)
    u = build_subsolution(P)
    assert np.all(u.values < 0)
    assert sub_margin(P, u) >= -1e-8
    u = build_subsolution(family.with_rho(-3.0))
    assert np.all(u.values < 0)
    assert sub_margin(family.with_rho(-3.0), u) >= -1e-8
    P = make_problem(family.op, JumpingLinear(0.5, 0.5), V2=2.5)
    assert build_subsolution(P).sup_norm() == 0.0


def test_supersolution_feasibility(family):
    low = build_supersolution(family.with_rho(-10))
    high = build_supersolution(family.with_rho(10))
    assert low.feasible and not high.feasible
    assert np.all(low.u_bar.values > 0)


def test_minimal_solution_matches_closed_form(family):
    P = family.with_rho(-1.0)
    res = monotone_iteration(P, build_subsolution(P), P.grid.zeros())
    u_minus, _ = exact_pair(P, -1.0)
    assert res.monotone_certificate
    assert res.residual <= 1e-8
    assert np.max(np.abs(res.solution.values - u_minus)) <= 1e-8
    assert residual(P, res.solution).sup_norm() <= 10 * 1e-10 * 10


def test_iteration_without_upper_function(family):
    P = family.with_rho(-1.0)
    res = monotone_iteration(P, build_subsolution(P), None)
    u_minus, _ = exact_pair(P, -1.0)
    assert res.monotone_certificate
    assert np.max(np.abs(res.solution.values - u_minus)) <= 1e-8


def test_zero_is_minimal_at_rho_zero(family):
    res = monotone_iteration(family, build_subsolution(family), family.grid.zeros())
    assert res.solution.sup_norm() <= 1e-8


def test_trivial_nonlinearity_one_step(family):
    P = make_problem(family.op, JumpingLinear(0.0, 0.0), V2=2.5)
    res = monotone_iteration(P, P.grid.zeros(), P.grid.zeros())
    assert res.iters == 1
    assert res.solution.sup_norm() == 0.0


def test_iteration_rejects_bad_lower(family):
    P = family.with_rho(-1.0)
    with pytest.raises(PreconditionNotMet):
        monotone_iteration(P, P.grid.ones(), None)


def test_residual_at_zero(family):
    assert residual(family, family.grid.zeros()).sup_norm() == 0.0
    np.testing.assert_allclose(residual(family.with_rho(1.0), family.grid.zeros()).values, -family.phi1.values)


def test_newton_finds_second_solution(family):
    P = family.with_rho(-0.5)
    res = monotone_iteration(P, build_subsolution(P), P.grid.zeros())
    found = newton_deflated(P, [res.solution])
    _, u_plus = exact_pair(P, -0.5)
    assert len(found) == 1
    assert np.max(np.abs(found[0].values - u_plus)) <= 1e-8
    assert np.max(np.abs(found[0].values - res.solution.values)) >= 1e-3
    assert residual(P, found[0]).sup_norm() <= 1e-9
    # the minimal solution lies below every other solution
    assert np.all(res.solution.values <= found[0].values + 1e-8)


def test_newton_nothing_new_for_linear_problem(family):
    P = make_problem(family.op, JumpingLinear(0.3, 0.3), rho=-1.0, V2=2.5)
    res = monotone_iteration(P, build_subsolution(P), None)
    assert newton_deflated(P, [res.solution]) == []


def test_shifted_forcing_equivalence(family):
    # h = -phi1 at rho is the same problem as h = 0 at rho - 1
    P = family.with_h(-family.phi1.values).with_rho(0.0)
    Q = family.with_rho(-1.0)
    a = monotone_iteration(P, build_subsolution(P), None).solution.values
    b = monotone_iteration(Q, build_subsolution(Q), None).solution.values
    np.testing.assert_allclose(a, b, atol=1e-8)
