import numpy as np
import pytest
from hypothesis import settings

from singlecall.core import (
    FeasibleSet,
    InclusionProblem,
    MaximalMonotoneOperator,
    Regime,
    SingleValuedOperator,
)

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


def affine_problem(M, b, A=None, name="affine", known_solution=None, L=None, regime=None):
    """Problem with ``F(z) = M z + b``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    L = float(np.linalg.norm(M, 2)) if L is None else L
    F = SingleValuedOperator(lambda z: M @ np.asarray(z, dtype=float) + b, max(L, 1e-12), name=name)
    return InclusionProblem(F=F, A=A or MaximalMonotoneOperator.zero(), dim=M.shape[0],
                            regime=regime or Regime("monotone"), known_solution=known_solution,
                            name=name)


def shifted_identity_on_box(lo=0.0, hi=1.0):
    """1-D problem ``F(z) = z - 2`` constrained to ``[lo, hi]``."""
    box = FeasibleSet.box(lo, hi, dim=1)
    return affine_problem([[1.0]], [-2.0], A=MaximalMonotoneOperator.normal_cone(box),
                          known_solution=np.array([hi]))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


SETS = {
    "full_space": FeasibleSet.full_space(3),
    "nonneg_orthant": FeasibleSet.nonneg_orthant(3),
    "box": FeasibleSet.box([-1.0, 0.0, 2.0], [1.0, 0.5, 2.0]),
    "ball": FeasibleSet.ball([0.5, -1.0, 2.0], 1.5),
    "halfspace": FeasibleSet.halfspace([1.0, -2.0, 0.5], 0.7),
}


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
