import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import affine_problem
from singlecall.algorithms import AdmissibilityWarning, AlgorithmConfig, run, stepsize_og
from singlecall.analysis import (
    AuditReport,
    audit_arg_initial,
    audit_arg_potential,
    audit_arg_potential_lower,
    audit_best_iterate_sums,
    audit_rg_potential,
    audit_theorem_bound,
    extremal_sequence,
    fit_rate,
    identity_sides,
    potential_P,
    potential_V,
    rg_constants,
    run_audit,
    verify_identity,
    verify_sequence_bound,
)
from singlecall.core import (
    InclusionProblem,
    MaximalMonotoneOperator,
    SingleValuedOperator,
    make_antidiagonal_problem,
    make_bilinear_box_problem,
    make_rotation_problem,
)
from singlecall.errors import InvalidWindowError, MissingSolutionError, WrongAlgorithmError


def quiet_run(problem, algo, eta, T, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AdmissibilityWarning)
        return run(problem, AlgorithmConfig(algo, eta, T, **kw))


def identity_1d():
    return affine_problem([[1.0]], [0.0], known_solution=np.zeros(1))


def stationary(algo):
    p = make_antidiagonal_problem(4)
    return quiet_run(p, algo, 0.1, 50, initial_point=np.zeros(4))


# -- potentials ---------------------------------------------------------------------------


def test_potential_P_hand_trace():
    tr = quiet_run(identity_1d(), "rg", 0.2, 3, initial_point=np.array([1.0]))
    assert potential_P(tr, 1) == pytest.approx(0.68, abs=1e-15)


def test_potential_V_hand_trace():
    tr = quiet_run(identity_1d(), "arg", 0.2, 3, initial_point=np.array([1.0]))
    assert potential_V(tr, 1) == pytest.approx(-0.0048, abs=1e-15)


def test_potentials_vanish_on_stationary_runs():
    rg, arg = stationary("rg"), stationary("arg")
    for t in range(1, 51):
        assert potential_P(rg, t) == 0.0
        assert potential_V(arg, t) == 0.0


def test_potential_wrong_algorithm():
    tr = stationary("eg")
    with pytest.raises(WrongAlgorithmError):
        potential_P(tr, 1)
    with pytest.raises(WrongAlgorithmError):
        potential_V(stationary("rg"), 1)
    with pytest.raises(ValueError):
        potential_P(stationary("rg"), 0)


def test_rg_potential_decreases_small_instance():
    tr = quiet_run(make_antidiagonal_problem(4), "rg", 0.2, 5)
    assert potential_P(tr, 2) <= potential_P(tr, 1)


# -- lemma audits -------------------------------------------------------------------------------


def test_stationary_audits_pass_with_zero_violation():
    rep = audit_rg_potential(stationary("rg"))
    assert rep.passed and rep.worst_violation == 0.0
    rep = audit_best_iterate_sums(stationary("rg"))
    assert rep.passed
    rep = audit_arg_potential(stationary("arg"))
    assert rep.passed and rep.worst_violation == 0.0


def test_rg_audits_antidiagonal():
    tr = quiet_run(make_antidiagonal_problem(100), "rg", 0.4, 2000)
    assert audit_rg_potential(tr).passed
    tr = quiet_run(make_antidiagonal_problem(100), "rg", 0.3, 2000)
    for rep in (audit_theorem_bound(tr, "rg_thm"), audit_best_iterate_sums(tr)):
        assert rep.passed, rep.row()
        assert set(rep.constants) >= {"H2", "lambda"}


def test_rg_audits_bilinear_box():
    tr = quiet_run(make_bilinear_box_problem(2), "rg", 0.3, 2000)
    for rep in (audit_rg_potential(tr), audit_theorem_bound(tr, "rg_thm"), audit_best_iterate_sums(tr)):
        assert rep.passed, rep.row()


def test_rg_audit_flags_regime_mismatch():
    p = make_rotation_problem(1.0, 2 * math.pi / 3)
    tr = quiet_run(p, "rg", 0.1, 200)
    rep = audit_rg_potential(tr)
    assert any("regime mismatch" in n for n in rep.notes)


def test_rg_constants_formula():
    H2, lam = rg_constants(0.3, 1.0, np.ones(2), np.zeros(2), np.array([3.0, 4.0]))
    assert H2 == pytest.approx(4 * 2 + 13 * 25)
    expected = math.sqrt(6 * (1 + 3 * 0.09) / (0.09 * (1 - (1 + math.sqrt(2)) * 0.3)))
    assert lam == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("problem", [make_antidiagonal_problem(100),
                                     make_rotation_problem(1.0, costheta=-1 / 60)],
                         ids=["antidiagonal", "rotation"])
def test_arg_audits(problem):
    tr = quiet_run(problem, "arg", 1 / 12, 2000)
    for rep in (audit_arg_potential(tr), audit_arg_initial(tr), audit_arg_potential_lower(tr),
                audit_theorem_bound(tr, "arg_thm")):
        assert rep.passed, rep.row()


def test_arg_initial_on_constrained_problem():
    p = make_bilinear_box_problem(2)
    tr = quiet_run(p, "arg", 1 / 12, 50, initial_point=np.array([1.0, -0.25]))
    rep = audit_arg_initial(tr)
    assert rep.passed and not rep.notes
    outside = audit_arg_initial(quiet_run(p, "arg", 1 / 12, 50, initial_point=np.array([3.0, -2.0])))
    assert any("outside" in n for n in outside.notes)


def test_og_theorem_audit():
    rho = -1 / (24 * math.sqrt(3))
    p = make_rotation_problem(1.0, costheta=rho)
    eta = stepsize_og(1.0, rho)
    rep = audit_theorem_bound(quiet_run(p, "og", eta, 2000), "og_thm")
    assert rep.passed, rep.row()
    assert rep.constants["C"] == pytest.approx(0.5 + 2 * rho / eta - 2 * eta ** 2)


def test_og_theorem_audit_constrained():
    p = make_bilinear_box_problem(2)
    rep = audit_theorem_bound(quiet_run(p, "og", stepsize_og(1.0, 0.0), 2000), "og_thm")
    assert rep.passed, rep.row()


def test_theorem_audit_errors():
    tr = quiet_run(make_antidiagonal_problem(4), "rg", 0.3, 10)
    with pytest.raises(WrongAlgorithmError):
        audit_theorem_bound(tr, "arg_thm")
    with pytest.raises(ValueError):
        audit_theorem_bound(tr, "xyz_thm")
    F = SingleValuedOperator(lambda z: np.array([z[1], -z[0]]), 1.0)
    nosol = InclusionProblem(F, MaximalMonotoneOperator.zero(), 2)
    tr = quiet_run(nosol, "rg", 0.3, 10)
    with pytest.raises(MissingSolutionError):
        audit_theorem_bound(tr, "rg_thm")
    with pytest.raises(MissingSolutionError):
        audit_best_iterate_sums(tr)


def test_run_audit_registry():
    tr = quiet_run(make_antidiagonal_problem(4), "rg", 0.3, 10)
    assert run_audit("rg_potential", tr).audit_name == "rg_potential"
    with pytest.raises(ValueError):
        run_audit("nope", tr)


@given(v=st.floats(-1, 1), tol=st.floats(0, 1))
def test_report_pass_iff_within_tolerance(v, tol):
    from singlecall.analysis import _report
    rep = _report("x", np.array([v, v - 1]), [3, 4], tol)
    assert rep.passed == (rep.worst_violation <= rep.tolerance)
    assert rep.worst_iteration == 3
    assert isinstance(rep, AuditReport)


# -- identities ---------------------------------------------------------------------------------------


@pytest.mark.parametrize("which", ["first", "second"])
def test_identities_hold_on_random_trials(which):
    rep = verify_identity(which, trials=1000, seed=42, dims=(1, 2, 8, 64))
    assert rep.passed, rep.row()
    assert rep.worst_violation < 1e-12


def test_second_identity_zero_vectors():
    z = np.zeros(8)
    lhs, rhs = identity_sides("second", z, z, z, z, z, z, z, z, k=3, q=0.3)
    assert lhs == 0.0 and rhs == 0.0


def test_second_identity_boundary_q_values():
    rep = verify_identity("second", trials=300, seed=1, q_values=[0.01, 0.24, 0.99])
    assert rep.passed


def test_identity_unknown():
    with pytest.raises(ValueError):
        identity_sides("third", *[np.zeros(2)] * 8)


@pytest.mark.parametrize("which", ["first", "second"])
def test_identities_symbolically(which):
    # independent oracle: symbolic expansion in one dimension, where inner products are products
    sp = pytest.importorskip("sympy")
    names = "x0 x2 y1 y2 y3 y4 u2 u4 k q"
    x0, x2, y1, y2, y3, y4, u2, u4, k, q = sp.symbols(names)
    anchor = (x0 - x2) / (k + 1) if which == "second" else 0
    x3 = x2 - y1 - u2 + anchor
    x4 = x2 - y3 - u4 + anchor
    if which == "first":
        lhs = ((y2 + u2) ** 2 + (y2 - y1) ** 2 - (y4 + u4) ** 2 - (y4 - y3) ** 2 - 2 * (y4 - y2) * (x4 - x2)
               - 2 * (sp.Rational(1, 4) * (x4 - x3) ** 2 - (y4 - y3) ** 2) - 2 * (u4 - u2) * (x4 - x2))
        rhs = ((x3 - x4) / 2 + y1 - y2) ** 2 + ((x3 + x4) / 2 - x2 + y2 + u2) ** 2
    else:
        lhs = (k * (k + 1) / 2 * ((y2 + u2) ** 2 + (y2 - y1) ** 2) + k * (y2 + u2) * (x2 - x0)
               - (k + 1) * (k + 2) / 2 * ((y4 + u4) ** 2 + (y4 - y3) ** 2) - (k + 1) * (y4 + u4) * (x4 - x0)
               - k * (k + 1) * (y4 + u4 - y2 - u2) * (x4 - x2) - k * (k + 1) / (4 * q) * (q * (x4 - x3) ** 2 - (y4 - y3) ** 2))
        rhs = (k * (k + 1) / 4 * (u4 - u2 + y1 - 2 * y2 + y3) ** 2
               + ((1 - 4 * q) * k - 4 * q) / (4 * q) * (k + 1) * (y3 - y4) ** 2 + (k + 1) * (y3 - y4) * (y4 + u4))
    assert sp.simplify(sp.expand(lhs - rhs)) == 0
    # numeric implementation agrees with the symbolic expressions at a rational point
    vals = dict(zip((x0, x2, y1, y2, y3, y4, u2, u4, k, q), (0.5, -1.25, 2.0, 0.75, -0.5, 1.5, -2.0, 0.25, 4, 0.375)))
    args = [np.array([float(vals[s])]) for s in (x0, x2, y1, y2, y3, y4, u2, u4)]
    num_lhs, num_rhs = identity_sides(which, *args, k=4, q=0.375)
    assert num_lhs == pytest.approx(float(lhs.subs(vals)), rel=1e-13)
    assert num_rhs == pytest.approx(float(rhs.subs(vals)), rel=1e-13)


# -- sequence bound -----------------------------------------------------------------------------------


def test_sequence_bound_extremal():
    rep = verify_sequence_bound(1.0, 0.1, 10_000)
    assert rep.passed
    a = extremal_sequence(1.0, 0.1, 10_000)
    k = np.arange(2, 10_001)
    assert np.all(a <= 4 / (0.7 * k * k))


def test_sequence_bound_zero_constant():
    assert np.all(extremal_sequence(0.0, 0.2, 100) == 0.0)
    assert verify_sequence_bound(0.0, 0.2, 100).passed


def test_sequence_bound_random_sequences():
    rep = verify_sequence_bound(2.5, 0.3, 1000, random_sequences=100, seed=9)
    assert rep.passed


def test_extremal_sequence_saturates_hypothesis():
    C1, p = 1.5, 0.2
    a = extremal_sequence(C1, p, 50)
    for i, ak in enumerate(a):
        k = i + 2
        assert k * k / 4 * ak == pytest.approx(C1 + p / (1 - p) * a[:i].sum(), rel=1e-14)


@pytest.mark.parametrize("p", [1 / 3, 0.5, 0.0, -0.1])
def test_sequence_bound_rejects_p(p):
    with pytest.raises(ValueError):
        verify_sequence_bound(1.0, p, 10)


def test_sequence_bound_rejects_negative_constant():
    with pytest.raises(ValueError):
        verify_sequence_bound(-1.0, 0.1, 10)


# -- rate fitting -------------------------------------------------------------------------------------------


def test_fit_rate_power_laws():
    t = np.arange(0, 1001, dtype=float)
    t[0] = 1.0
    fit = fit_rate(1.0 / t, (10, 1000))
    assert fit.slope == pytest.approx(-1.0, abs=1e-6) and fit.r_squared == pytest.approx(1.0)
    assert fit_rate(1.0 / np.sqrt(t), (10, 1000)).slope == pytest.approx(-0.5, abs=1e-6)


def test_fit_rate_errors():
    r = np.ones(100)
    r[50] = 0.0
    with pytest.raises(InvalidWindowError):
        fit_rate(r, (10, 60))
    with pytest.raises(InvalidWindowError):
        fit_rate(r, (10, 200))
    with pytest.raises(InvalidWindowError):
        fit_rate(r, (20, 10))


def test_fit_rate_on_trajectory():
    tr = quiet_run(make_rotation_problem(1.0, costheta=-1 / 60), "arg", 1 / 12, 2000)
    assert fit_rate(tr, (100, 2000)).slope <= -0.9
