import warnings

import numpy as np
import pytest

from fracprodi import apsweep
from fracprodi.apsweep import (
    CSV_COLUMNS,
    SweepRecord,
    apriori_check,
    find_rho_star,
    records_to_csv,
    scaling_check,
    solvable,
    sweep,
)
from fracprodi.errors import BracketInvalid, PredicateInconsistent
from fracprodi.fraclap import assemble
from fracprodi.grid import GridFn, make_ball_grid, make_interval_grid
from fracprodi.semilinear import JumpingLinear, PowerAP, make_problem, residual


@pytest.fixture(scope="module")
def family():
    op = assemble(make_interval_grid(-1, 1, 150), 0.5)
    return make_problem(op, JumpingLinear(0.5, 2.5))


@pytest.fixture(scope="module")
def rho_star(family):
    return find_rho_star(family, (-1.0, 10.0), 1e-2)


def test_solvable_statuses(family):
    assert solvable(family.with_rho(0.0)).solved
    below = solvable(family.with_rho(-2.0))
    assert below.status == "solved_multiple"
    assert below.n_solutions_found >= 2
    assert below.status_label == f"solved_multiple({below.n_solutions_found})"
    for u in below.solutions:
        assert residual(family.with_rho(-2.0), u).sup_norm() <= 1e-8
    above = solvable(family.with_rho(10.0))
    assert above.status == "nonconvergent"
    assert above.n_solutions_found == 0
    assert any("GuardExceeded" in n for n in above.notes)


def test_solutions_pairwise_distinct(family):
    rec = solvable(family.with_rho(-1.0))
    sols = [u.values for u in rec.solutions]
    for i in range(len(sols)):
        for j in range(i + 1, len(sols)):
            assert np.max(np.abs(sols[i] - sols[j])) > 1e-6


def test_rho_star_bracket(family, rho_star):
    assert rho_star.width <= 1e-2
    assert rho_star.lo <= rho_star.rho_star <= rho_star.hi <= 10.0
    assert rho_star.hi >= 0.0
    assert solvable(family.with_rho(0.0)).solved
    # for h = 0 the discrete threshold is exactly 0
    assert abs(rho_star.rho_star) <= 1e-2


def test_rho_star_log_includes_verification(rho_star):
    rhos = [r for r, _ in rho_star.evaluations]
    assert rhos[-2] == pytest.approx(rho_star.rho_star - 1e-2)
    assert rhos[-1] == pytest.approx(rho_star.rho_star + 1e-2)


def test_rho_star_re_evaluation(family, rho_star):
    assert solvable(family.with_rho(rho_star.rho_star - 1e-2)).solved
    assert not solvable(family.with_rho(rho_star.rho_star + 1e-2)).solved


def test_rho_star_shift_by_phi1(family, rho_star):
    shifted = family.with_h(-family.phi1.values)
    res = find_rho_star(shifted, (0.0, 11.0), 1e-2)
    assert res.rho_star - rho_star.rho_star == pytest.approx(1.0, abs=1e-2)


def test_invalid_brackets(family):
    with pytest.raises(BracketInvalid):
        find_rho_star(family, (1.0, 10.0))
    with pytest.raises(BracketInvalid):
        find_rho_star(family, (-2.0, -1.0))
    with pytest.raises(BracketInvalid):
        find_rho_star(family, (3.0, 3.0))


def test_inconsistent_predicate(family, monkeypatch):
    # a spurious solvable window just above the threshold shows up on re-evaluation
    def fake(problem, budget=None):
        ok = problem.rho < 0.003 or 0.01 < problem.rho < 0.02
        return SweepRecord(problem.rho, "solved_minimal" if ok else "nonconvergent", 0.0, int(ok))

    monkeypatch.setattr(apsweep, "solvable", fake)
    with pytest.raises(PredicateInconsistent):
        find_rho_star(family, (-1.0, 10.0), 1e-2)


def test_sweep_shape(family, rho_star):
    r = rho_star.rho_star
    rhos = [-3, -2, -1, -0.5, r - 0.1, r + 0.5]
    recs = sweep(family, rhos)
    assert [rec.rho for rec in recs] == [float(x) for x in rhos]
    assert all(rec.status == "solved_multiple" for rec in recs[:4])
    assert recs[4].solved
    assert recs[5].status == "nonconvergent"
    solvable_rhos = [rec.rho for rec in recs if rec.solved]
    assert max(solvable_rhos) < min(rec.rho for rec in recs if not rec.solved)


def test_sweep_empty_and_duplicates(family):
    assert sweep(family, []) == []
    a, b = sweep(family, [-1.0, -1.0])
    assert a.status == b.status and a.n_solutions_found == b.n_solutions_found
    for u, v in zip(a.solutions, b.solutions):
        np.testing.assert_array_equal(u.values, v.values)
    assert records_to_csv([a]) == records_to_csv([b])


def test_sweep_warns_on_rising_count(family, monkeypatch):
    counts = {-1.0: 1, 0.0: 2}

    def fake(problem, budget=None):
        k = counts[problem.rho]
        return SweepRecord(problem.rho, "solved_multiple" if k > 1 else "solved_minimal", 0.0, k)

    monkeypatch.setattr(apsweep, "solvable", fake)
    with pytest.warns(RuntimeWarning, match="count rises"):
        recs = sweep(family, [0.0, -1.0])
    assert recs[0].notes


def test_apriori_bounds_hold(family):
    for rho in (-3.0, -1.0, 0.0):
        d = solvable(family.with_rho(rho)).diagnostics
        assert d["bound_margin_L35"] >= -1e-12
        assert d["bound_margin_L36"] >= 0


def test_apriori_minimal_solution_strict_margin(family):
    P = family.with_rho(-1.0)
    rec = solvable(P)
    minimal_only = SweepRecord(rec.rho, "solved_minimal", rec.minimal_sup_norm, 1, solutions=rec.solutions[:1])
    d = apriori_check(minimal_only, P)
    assert d["bound_margin_L35"] > 0


def test_apriori_zero_solution(family):
    rec = SweepRecord(0.0, "solved_minimal", 0.0, 1, solutions=[family.grid.zeros()])
    d = apriori_check(rec, family)
    assert d["sup_u_minus"] == 0.0
    assert d["bound_margin_L35"] >= 0 and d["bound_margin_L36"] > 0


def test_csv_layout(family):
    recs = sweep(family, [-1.0, 5.0])
    text = records_to_csv(recs, header_lines=["config_sha256: abc"])
    lines = text.splitlines()
    assert lines[0] == "# config_sha256: abc"
    assert lines[1] == ",".join(CSV_COLUMNS)
    assert lines[2].split(",")[1].startswith("solved_multiple(")
    assert lines[3].split(",")[1] == "nonconvergent"
    assert lines[3].split(",")[3] == "nan"


def test_sweep_emits_no_warning_on_clean_pattern(family):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sweep(family, [-1.0, 0.0, 2.0])


_G = make_interval_grid(-1, 1, 5)


def _record(rho, sups):
    sols = [GridFn(_G, np.full(_G.n, s)) for s in sups]
    return SweepRecord(rho, "solved_minimal", sups[0], len(sups), solutions=sols)


def test_scaling_check_uses_largest_solution():
    a = _record(-1.0, [1.0])
    b = _record(-4.0, [1.5, -2.0])
    sc = scaling_check(a, b, 2.0)
    assert sc.measured == pytest.approx(2.0)
    assert sc.predicted == pytest.approx(2.0)
    assert sc.passed
    assert not scaling_check(a, _record(-4.0, [8.0]), 2.0, factor=2.0).passed
    with pytest.raises(ValueError):
        scaling_check(a, SweepRecord(-2.0, "nonconvergent", float("nan"), 0), 2.0)


def test_superlinear_minimal_solution_is_linear_for_negative_rho():
    # on the negative branch f is linear, so u_min = rho phi1 / (lambda0 - slope) exactly
    op = assemble(make_ball_grid(1.0, 11), 0.25)
    P = make_problem(op, PowerAP(1.0, 2.0, 0.5))
    for rho in (-1.0, -3.0):
        rec = solvable(P.with_rho(rho))
        exact = rho * P.phi1.values / (P.lambda0 - 0.5)
        assert np.max(np.abs(rec.solutions[0].values - exact)) <= 1e-8
    assert "sup_abs_u" in rec.diagnostics
