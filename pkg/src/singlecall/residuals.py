"""Convergence measures for inclusion problems.

The tangent residual ``min_{c in A(z)} ||F(z) + c||`` dominates the natural
and forward-backward residuals; all of them reduce to ``||F(z)||`` when
``A = 0``. The tangent residual is only computable in closed form for the zero
operator and for normal cones of the supported feasible sets. For everything
else, callers report the natural residual together with the certified
residual ``||F(z) + c||`` built from an element ``c`` the algorithm produced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from .core import FeasibleSet, InclusionProblem, as_point
from .errors import DimensionError, InfeasiblePointError, UnsupportedOperatorError


@dataclass(frozen=True)
class ResidualReport:
    natural: float
    forward_backward: float
    alpha: float = 1.0
    tangent_exact: Optional[float] = None
    certified: Optional[float] = None

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class GapResult:
    value: float
    is_exact: bool


def _F(problem: InclusionProblem, z, F_z=None) -> np.ndarray:
    return problem.F(z) if F_z is None else as_point(F_z, problem.dim)


def natural_residual(problem: InclusionProblem, z, F_z=None) -> float:
    """``||z - J_A(z - F(z))||``."""
    z = as_point(z, problem.dim)
    g = _F(problem, z, F_z)
    return float(np.linalg.norm(z - problem.A.resolvent(1.0, z - g)))


def forward_backward_residual(problem: InclusionProblem, alpha: float, z, F_z=None) -> float:
    """``||z - J_{alpha A}(z - alpha F(z))|| / alpha``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    z = as_point(z, problem.dim)
    g = _F(problem, z, F_z)
    return float(np.linalg.norm(z - problem.A.resolvent(alpha, z - alpha * g)) / alpha)


def _normal_set(problem: InclusionProblem) -> FeasibleSet:
    fs = problem.A.effective_set
    if fs is None:
        raise UnsupportedOperatorError(
            f"tangent residual needs A = 0 or a normal cone, got kind {problem.A.kind!r}")
    return fs


def tangent_element(problem: InclusionProblem, z, F_z=None) -> np.ndarray:
    """The ``c in A(z)`` that minimises ``||F(z) + c||``."""
    z = as_point(z, problem.dim)
    return _normal_set(problem).min_normal_element(z, _F(problem, z, F_z))


def tangent_residual_exact(problem: InclusionProblem, z, F_z=None) -> float:
    """``min_{c in A(z)} ||F(z) + c||`` for the zero operator or a normal cone.

    Raises :class:`UnsupportedOperatorError` for other kinds of ``A``.
    """
    z = as_point(z, problem.dim)
    g = _F(problem, z, F_z)
    c = _normal_set(problem).min_normal_element(z, g)
    return float(np.linalg.norm(g + c))


def certified_residual(F_z, c) -> float:
    """``||F(z) + c||`` for a cone element ``c`` the caller vouches for."""
    F_z = as_point(F_z)
    c = as_point(c)
    if F_z.shape != c.shape:
        raise DimensionError(f"F(z) has shape {F_z.shape}, c has shape {c.shape}")
    return float(np.linalg.norm(F_z + c))


def _min_linear_two_balls(g, z, center, R, D):
    """Minimiser of ``<g, p>`` over ``B(center, R) ∩ B(z, D)`` with z in both."""
    ng = np.linalg.norm(g)
    g_hat = g / ng
    p1 = center - R * g_hat
    if np.linalg.norm(p1 - z) <= D:
        return p1
    p2 = z - D * g_hat
    if np.linalg.norm(p2 - center) <= R:
        return p2
    # optimum on the intersection sphere of both boundaries
    d = z - center
    nd = np.linalg.norm(d)
    e = d / nd
    a = (nd * nd + R * R - D * D) / (2 * nd)
    h = math.sqrt(max(R * R - a * a, 0.0))
    g_perp = g - (g @ e) * e
    n_perp = np.linalg.norm(g_perp)
    mid = center + a * e
    if n_perp == 0:
        return mid
    return mid - h * g_perp / n_perp


def restricted_gap(problem: InclusionProblem, D: float, z, F_z=None) -> GapResult:
    """``max <F(z), z - z'>`` over feasible ``z'`` with ``||z' - z|| <= D``.

    Exact for the full space and for balls; for other sets the bound
    ``D * min_{c in N(z)} ||F(z) + c||`` is returned with ``is_exact=False``.
    """
    if not D > 0:
        raise ValueError("D must be positive")
    fs = _normal_set(problem)
    z = as_point(z, problem.dim)
    if not fs.contains(z, tol=1e-10):
        raise InfeasiblePointError("restricted gap needs z in the feasible set")
    g = _F(problem, z, F_z)
    if fs.kind == "full_space":
        return GapResult(float(D * np.linalg.norm(g)), True)
    if fs.kind == "euclidean_ball":
        if not np.any(g):
            return GapResult(0.0, True)
        p = _min_linear_two_balls(g, z, fs.center, fs.radius, D)
        return GapResult(float(max(g @ (z - p), 0.0)), True)
    c = fs.min_normal_element(z, g)
    return GapResult(float(D * np.linalg.norm(g + c)), False)


def residual_report(problem: InclusionProblem, z, c=None, alpha: float = 1.0,
                    F_z=None) -> ResidualReport:
    """Collect every residual available for ``problem`` at ``z``.

    ``c``, if given, is an element of ``A(z)`` used for the certified value.
    """
    z = as_point(z, problem.dim)
    g = _F(problem, z, F_z)
    tangent = None
    if problem.A.effective_set is not None:
        tangent = tangent_residual_exact(problem, z, F_z=g)
    return ResidualReport(
        natural=natural_residual(problem, z, F_z=g),
        forward_backward=forward_backward_residual(problem, alpha, z, F_z=g),
        alpha=alpha,
        tangent_exact=tangent,
        certified=None if c is None else certified_residual(g, c),
    )
