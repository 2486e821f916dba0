import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import SETS, affine_problem, shifted_identity_on_box
from singlecall.core import FeasibleSet, MaximalMonotoneOperator, make_antidiagonal_problem
from singlecall.errors import DimensionError, InfeasiblePointError, UnsupportedOperatorError
from singlecall.residuals import (
    certified_residual,
    forward_backward_residual,
    natural_residual,
    residual_report,
    restricted_gap,
    tangent_element,
    tangent_residual_exact,
)

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


def orthant_1d(g):
    fs = FeasibleSet.nonneg_orthant(1)
    return affine_problem([[0.0]], [g], A=MaximalMonotoneOperator.normal_cone(fs), L=1.0)


# -- natural / forward-backward --------------------------------------------------------


def test_natural_with_zero_operator_is_operator_norm():
    p = make_antidiagonal_problem(4)
    z = np.array([1.0, -2.0, 3.0, 0.5])
    assert natural_residual(p, z) == np.linalg.norm(p.F(z))
    for alpha in (0.1, 1.0, 3.0):
        assert forward_backward_residual(p, alpha, z) == pytest.approx(np.linalg.norm(p.F(z)), rel=1e-15)


def test_natural_zero_at_antidiagonal_solution():
    assert natural_residual(make_antidiagonal_problem(6), np.zeros(6)) == 0.0


def test_box_fixed_point_examples():
    p = shifted_identity_on_box()
    assert natural_residual(p, [1.0]) == 0.0
    assert forward_backward_residual(p, 0.5, [1.0]) == 0.0
    # brute force: z = 1 is the only grid point of [0, 1] with <F(z), z' - z> >= 0 for all z'
    grid = np.linspace(0, 1, 1001)
    sols = [z for z in grid if np.all((z - 2) * (grid - z) >= -1e-12)]
    assert sols == [1.0]


def test_fb_equals_natural_at_alpha_one(rng):
    p = shifted_identity_on_box()
    for z in rng.uniform(0, 1, size=20):
        assert forward_backward_residual(p, 1.0, [z]) == natural_residual(p, [z])


def test_fb_rejects_nonpositive_alpha():
    with pytest.raises(ValueError):
        forward_backward_residual(shifted_identity_on_box(), 0.0, [0.5])


# -- tangent residual ------------------------------------------------------------------------


def test_tangent_zero_operator():
    p = make_antidiagonal_problem(2)
    assert tangent_residual_exact(p, [3.0, 4.0]) == 5.0


@pytest.mark.parametrize("g, expected", [(3.0, 0.0), (-3.0, 3.0), (0.0, 0.0)])
def test_tangent_orthant_1d_against_brute_force(g, expected):
    p = orthant_1d(g)
    c_grid = np.linspace(-100, 0, 100_001)
    brute = np.min(np.abs(g + c_grid))
    assert tangent_residual_exact(p, [0.0]) == pytest.approx(expected, abs=1e-12)
    assert abs(tangent_residual_exact(p, [0.0]) - brute) <= 1e-6


def _normal_cone_generators(fs, z):
    """Finite generator set of N(z) for the 2-D sets in the oracle tests."""
    if fs.kind == "box":
        gens = []
        for i in range(2):
            e = np.eye(2)[i]
            if z[i] <= fs.lower[i]:
                gens.append(-e)
            if z[i] >= fs.upper[i]:
                gens.append(e)
        return gens
    if fs.kind == "euclidean_ball":
        d = z - fs.center
        return [d / np.linalg.norm(d)] if np.linalg.norm(d) >= fs.radius - 1e-12 else []
    if fs.kind == "halfspace":
        return [fs.normal] if fs.normal @ z >= fs.offset - 1e-12 else []
    return []


@pytest.mark.parametrize("fs, z", [
    (FeasibleSet.box([0.0, 0.0], [1.0, 1.0]), np.array([0.0, 1.0])),
    (FeasibleSet.box([0.0, 0.0], [1.0, 1.0]), np.array([1.0, 0.5])),
    (FeasibleSet.box([0.0, 0.0], [1.0, 1.0]), np.array([0.3, 0.5])),
    (FeasibleSet.ball([0.0, 0.0], 1.0), np.array([0.6, 0.8])),
    (FeasibleSet.halfspace([1.0, 2.0], 1.0), np.array([1.0, 0.0])),
])
def test_tangent_2d_against_discretised_cone(fs, z):
    # oracle: minimise ||g + sum_k lam_k n_k|| over a grid of cone coefficients
    rng = np.random.default_rng(0)
    gens = _normal_cone_generators(fs, z)
    lam = np.linspace(0, 20, 4001)
    for _ in range(20):
        g = rng.uniform(-5, 5, size=2)
        p = affine_problem(np.zeros((2, 2)), g, A=MaximalMonotoneOperator.normal_cone(fs), L=1.0)
        if not gens:
            brute = np.linalg.norm(g)
        elif len(gens) == 1:
            brute = np.min(np.linalg.norm(g + lam[:, None] * gens[0], axis=1))
        else:
            L1, L2 = np.meshgrid(lam[::4], lam[::4])
            pts = g + L1.reshape(-1, 1) * gens[0] + L2.reshape(-1, 1) * gens[1]
            brute = np.min(np.linalg.norm(pts, axis=1))
        exact = tangent_residual_exact(p, z)
        assert exact <= brute + 1e-12
        # grid spacing bounds the oracle's own error
        assert brute - exact <= (2e-2 if len(gens) == 2 else 1e-5)


def test_tangent_element_is_in_normal_cone(rng):
    for fs in SETS.values():
        A = MaximalMonotoneOperator.normal_cone(fs)
        p = affine_problem(np.zeros((3, 3)), rng.standard_normal(3), A=A, L=1.0)
        for x in rng.uniform(-5, 5, size=(50, 3)):
            z = fs.project(x)
            c = tangent_element(p, z)
            assert A.contains(z, c, tol=1e-9)


def test_tangent_unsupported_operator():
    p = affine_problem(np.eye(2), [0.0, 0.0], A=MaximalMonotoneOperator.subgradient("l1_norm"),
                       known_solution=np.zeros(2))
    with pytest.raises(UnsupportedOperatorError):
        tangent_residual_exact(p, [0.0, 0.0])
    rep = residual_report(p, [1.0, 1.0])
    assert rep.tangent_exact is None and rep.natural > 0


# -- certified ----------------------------------------------------------------------------------


def test_certified_examples():
    g = np.array([1.0, -2.0])
    assert certified_residual(g, -g) == 0.0
    assert certified_residual(g, np.zeros(2)) == np.linalg.norm(g)
    with pytest.raises(DimensionError):
        certified_residual(g, np.zeros(3))


# -- restricted gap -------------------------------------------------------------------------------


def test_gap_zero_at_solution():
    p = shifted_identity_on_box()
    assert restricted_gap(p, 0.5, [1.0]).value == 0.0


def test_gap_full_space_closed_form():
    p = make_antidiagonal_problem(2)
    g = restricted_gap(p, 2.0, [3.0, 4.0])
    assert g.is_exact and g.value == pytest.approx(10.0)


def test_gap_box_is_upper_bound():
    p = shifted_identity_on_box()
    g = restricted_gap(p, 1.0, [0.5])
    assert not g.is_exact
    assert g.value == pytest.approx(1.5)  # D * ||F(z) + c|| with c = 0 in the interior


def test_gap_infeasible_point():
    with pytest.raises(InfeasiblePointError):
        restricted_gap(shifted_identity_on_box(), 1.0, [2.0])
    with pytest.raises(ValueError):
        restricted_gap(shifted_identity_on_box(), 0.0, [0.5])


def _random_search_gap(g, z, D, fs, n_dirs, rng):
    dirs = rng.standard_normal((n_dirs, z.size))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = D * rng.uniform(0, 1, size=(n_dirs, 1)) ** (1 / z.size)
    pts = np.vstack([z + D * dirs, z + radii * dirs])
    if fs.kind == "euclidean_ball":
        # keep boundary candidates of the set as well
        pts = np.vstack([pts, [fs.project(q) for q in pts]])
        ok = np.linalg.norm(pts - fs.center, axis=1) <= fs.radius + 1e-12
        ok &= np.linalg.norm(pts - z, axis=1) <= D + 1e-12
        pts = pts[ok]
    return max(0.0, np.max((z - pts) @ g))


@pytest.mark.parametrize("kind", ["full_space", "ball"])
def test_gap_exact_matches_random_search(kind):
    rng = np.random.default_rng(21)
    for trial in range(10):
        if kind == "full_space":
            fs = FeasibleSet.full_space(2)
        else:
            fs = FeasibleSet.ball(rng.uniform(-1, 1, 2), rng.uniform(0.5, 2.0))
        g = rng.uniform(-3, 3, 2)
        p = affine_problem(np.zeros((2, 2)), g, A=MaximalMonotoneOperator.normal_cone(fs), L=1.0)
        z = fs.project(rng.uniform(-3, 3, 2))
        D = rng.uniform(0.2, 3.0)
        exact = restricted_gap(p, D, z)
        assert exact.is_exact
        search = _random_search_gap(g, z, D, fs, 100_000, rng)
        assert search <= exact.value * (1 + 1e-9) + 1e-12
        assert exact.value - search <= 1e-6 * max(1.0, exact.value) + 1e-3 * exact.value


# -- ordering -----------------------------------------------------------------------------------------

ORDER_SETS = [FeasibleSet.box([-1.0, 0.0, -2.0], [1.0, 3.0, 0.5]), FeasibleSet.ball([0.5, 0.0, -1.0], 2.0),
              FeasibleSet.nonneg_orthant(3)]


@given(idx=st.integers(0, 2), M=arrays(np.float64, (3, 3), elements=st.floats(-5, 5)),
       b=arrays(np.float64, 3, elements=finite), x=arrays(np.float64, 3, elements=finite))
def test_residual_ordering_property(idx, M, b, x):
    fs = ORDER_SETS[idx]
    p = affine_problem(M, b, A=MaximalMonotoneOperator.normal_cone(fs), L=1.0)
    z = fs.project(x)
    tan = tangent_residual_exact(p, z)
    scale = 1e-10 * max(1.0, np.linalg.norm(p.F(z)))
    assert tan >= natural_residual(p, z) - scale
    for alpha in (0.1, 0.5, 1.0, 2.0):
        assert tan >= forward_backward_residual(p, alpha, z) - scale


@given(M=arrays(np.float64, (2, 2), elements=st.floats(-5, 5)), b=arrays(np.float64, 2, elements=finite),
       z=arrays(np.float64, 2, elements=finite))
def test_unconstrained_collapse(M, b, z):
    p = affine_problem(M, b, L=1.0)
    nF = np.linalg.norm(p.F(z))
    rep = residual_report(p, z, c=np.zeros(2), alpha=0.3)
    for v in (rep.natural, rep.forward_backward, rep.tangent_exact, rep.certified):
        assert abs(v - nF) <= 1e-12 * max(1.0, nF)


def test_report_certified_dominates_tangent(rng):
    fs = FeasibleSet.box(0.0, 1.0, dim=3)
    A = MaximalMonotoneOperator.normal_cone(fs)
    p = affine_problem(rng.standard_normal((3, 3)), rng.standard_normal(3), A=A, L=1.0)
    for x in rng.uniform(-3, 3, size=(200, 3)):
        z = fs.project(x)
        rep = residual_report(p, z, c=x - z)
        assert rep.certified >= rep.tangent_exact - 1e-10
        assert rep.as_dict()["alpha"] == 1.0
