"""Operators, feasible sets and problem instances for inclusion problems.

An inclusion problem asks for ``z`` with ``0 in F(z) + A(z)``, where ``F`` is
single valued and Lipschitz and ``A`` is maximally monotone. Every solver in
this package touches ``A`` only through its resolvent ``J_{eta A}``, so that
is the central method of :class:`MaximalMonotoneOperator`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import (
    DimensionError,
    MissingAnchorError,
    UnsupportedOperatorError,
)

# relative slack used to decide that a point sits on a curved/affine boundary
BOUNDARY_RTOL = 1e-12


def as_point(x, dim: Optional[int] = None) -> np.ndarray:
    """Return ``x`` as a 1-D float64 array, checking length when ``dim`` is set."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"expected dimension {dim}, got {arr.shape[0]}")
    return arr


# ---------------------------------------------------------------------------
# feasible sets


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    """Closed convex set with a closed-form Euclidean projection.

    Use the constructors :meth:`full_space`, :meth:`box`, :meth:`ball`,
    :meth:`nonneg_orthant` and :meth:`halfspace` rather than building one
    directly. ``full_space`` and ``nonneg_orthant`` may leave the dimension
    open (``dim=None``), in which case they accept vectors of any length.
    """

    kind: str
    dim: Optional[int] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None
    radius: float = 0.0
    normal: Optional[np.ndarray] = None
    offset: float = 0.0

    @classmethod
    def full_space(cls, dim: Optional[int] = None) -> "FeasibleSet":
        return cls("full_space", dim=dim)

    @classmethod
    def nonneg_orthant(cls, dim: Optional[int] = None) -> "FeasibleSet":
        return cls("nonneg_orthant", dim=dim)

    @classmethod
    def box(cls, lower, upper, dim: Optional[int] = None) -> "FeasibleSet":
        """Box ``lower <= z <= upper``; scalar bounds are broadcast to ``dim``."""
        lo = np.asarray(lower, dtype=np.float64)
        hi = np.asarray(upper, dtype=np.float64)
        if dim is None:
            dim = max(lo.size, hi.size) if (lo.ndim or hi.ndim) else None
            if dim is None:
                raise DimensionError("scalar box bounds need an explicit dim")
        lo = np.broadcast_to(lo, (dim,)).copy()
        hi = np.broadcast_to(hi, (dim,)).copy()
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
            raise ValueError("box needs lower <= upper in every coordinate")
        return cls("box", dim=dim, lower=lo, upper=hi)

    @classmethod
    def ball(cls, center, radius: float) -> "FeasibleSet":
        c = as_point(center)
        if not radius > 0:
            raise ValueError("ball radius must be positive")
        return cls("euclidean_ball", dim=c.shape[0], center=c, radius=float(radius))

    @classmethod
    def halfspace(cls, normal, offset: float) -> "FeasibleSet":
        """The set ``{z : <normal, z> <= offset}``."""
        a = as_point(normal)
        if not np.any(a):
            raise ValueError("halfspace normal must be nonzero")
        return cls("halfspace", dim=a.shape[0], normal=a, offset=float(offset))

    # -- helpers ----------------------------------------------------------

    def _vec(self, x) -> np.ndarray:
        return as_point(x, self.dim)

    def _bounds(self, n: int):
        if self.kind == "box":
            return self.lower, self.upper
        if self.kind == "nonneg_orthant":
            return np.zeros(n), np.full(n, np.inf)
        return np.full(n, -np.inf), np.full(n, np.inf)

    @property
    def is_boxlike(self) -> bool:
        return self.kind in ("full_space", "nonneg_orthant", "box")

    # -- geometry ---------------------------------------------------------

    def project(self, x) -> np.ndarray:
        """Euclidean projection of ``x`` onto the set."""
        x = self._vec(x)
        if self.kind == "full_space":
            return x.copy()
        if self.kind == "nonneg_orthant":
            return np.maximum(x, 0.0)
        if self.kind == "box":
            return np.clip(x, self.lower, self.upper)
        if self.kind == "euclidean_ball":
            d = x - self.center
            nd = np.linalg.norm(d)
            if nd <= self.radius:
                return x.copy()
            return self.center + d * (self.radius / nd)
        if self.kind == "halfspace":
            a = self.normal
            excess = a @ x - self.offset
            if excess <= 0:
                return x.copy()
            return x - (excess / (a @ a)) * a
        raise UnsupportedOperatorError(f"unknown set kind {self.kind!r}")

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = self._vec(x)
        if self.kind == "euclidean_ball":
            return bool(np.linalg.norm(x - self.center) <= self.radius * (1 + tol) + tol)
        if self.kind == "halfspace":
            return bool(self.normal @ x <= self.offset + tol * max(1.0, abs(self.offset)))
        lo, hi = self._bounds(x.shape[0])
        return bool(np.all(x >= lo - tol) and np.all(x <= hi + tol))

    def _outward_normal(self, z: np.ndarray) -> Optional[np.ndarray]:
        """Unit outward normal if ``z`` lies on a smooth boundary, else ``None``."""
        if self.kind == "euclidean_ball":
            d = z - self.center
            nd = np.linalg.norm(d)
            if nd >= self.radius * (1 - BOUNDARY_RTOL):
                return d / nd
            return None
        if self.kind == "halfspace":
            a = self.normal
            na = np.linalg.norm(a)
            slack = BOUNDARY_RTOL * max(1.0, abs(self.offset), na * np.linalg.norm(z))
            if a @ z >= self.offset - slack:
                return a / na
            return None
        raise AssertionError(self.kind)

    def min_normal_element(self, z, g) -> np.ndarray:
        """Return ``argmin_{c in N(z)} ||g + c||``.

        By Moreau's decomposition ``g + c*`` is minus the projection of ``-g``
        onto the tangent cone at ``z``. Closed forms: coordinate-wise for
        box-like sets, a single outward ray for balls and halfspaces.
        """
        z = self._vec(z)
        g = as_point(g, z.shape[0])
        if self.is_boxlike:
            lo, hi = self._bounds(z.shape[0])
            c = np.zeros_like(z)
            fixed = lo == hi
            at_lo = (z <= lo) & ~fixed
            at_hi = (z >= hi) & ~fixed
            c[fixed] = -g[fixed]
            c[at_lo] = -np.maximum(g[at_lo], 0.0)
            c[at_hi] = -np.minimum(g[at_hi], 0.0)
            return c
        n_hat = self._outward_normal(z)
        if n_hat is None:
            return np.zeros_like(z)
        lam = max(0.0, -(g @ n_hat))
        return lam * n_hat

    def normal_cone_gap(self, z, c) -> float:
        """``sup_{z' in Z} <c, z' - z>``; ``c`` is in ``N(z)`` iff this is ``<= 0``.

        Returns ``inf`` when ``c`` points in an unbounded direction of the set.
        """
        z = self._vec(z)
        c = as_point(c, z.shape[0])
        if self.is_boxlike:
            lo, hi = self._bounds(z.shape[0])
            pos = c > 0
            neg = c < 0
            if np.any(pos & np.isinf(hi)) or np.any(neg & np.isinf(lo)):
                return math.inf
            total = np.sum(c[pos] * (hi[pos] - z[pos])) + np.sum(c[neg] * (lo[neg] - z[neg]))
            return float(total)
        if self.kind == "euclidean_ball":
            return float(c @ (self.center - z) + self.radius * np.linalg.norm(c))
        if self.kind == "halfspace":
            a = self.normal
            na = np.linalg.norm(a)
            a_hat = a / na
            lam = float(c @ a_hat)
            perp = np.linalg.norm(c - lam * a_hat)
            if perp > 1e-10 * (1.0 + np.linalg.norm(c)) or lam < 0:
                return math.inf
            return lam * (self.offset / na - float(a_hat @ z))
        raise UnsupportedOperatorError(f"unknown set kind {self.kind!r}")

    def sample(self, rng: np.random.Generator, count: int, radius: float = 10.0,
               around=None, dim: Optional[int] = None) -> np.ndarray:
        """Draw ``count`` points of the set by projecting uniform L-inf samples."""
        n = self.dim if self.dim is not None else dim
        if n is None:
            raise DimensionError("set has no fixed dimension; pass dim=")
        base = np.zeros(n) if around is None else as_point(around, n)
        raw = base + rng.uniform(-radius, radius, size=(count, n))
        return np.array([self.project(x) for x in raw])

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.dim is not None:
            out["dim"] = self.dim
        if self.kind == "box":
            out["lower"] = self.lower.tolist()
            out["upper"] = self.upper.tolist()
        elif self.kind == "euclidean_ball":
            out["center"] = self.center.tolist()
            out["radius"] = self.radius
        elif self.kind == "halfspace":
            out["normal"] = self.normal.tolist()
            out["offset"] = self.offset
        return out


def project(feasible_set: FeasibleSet, x) -> np.ndarray:
    """Euclidean projection of ``x`` onto ``feasible_set``."""
    return feasible_set.project(x)


# ---------------------------------------------------------------------------
# proximal operators

PROX_NAMES = ("l1_norm", "l2_norm", "squared_l2")

ProxSpec = Union[str, FeasibleSet]


def prox(g: ProxSpec, lam: float, v) -> np.ndarray:
    """Closed-form ``argmin_z g(z) + ||z - v||^2 / (2 lam)``.

    ``g`` is one of ``"l1_norm"``, ``"l2_norm"``, ``"squared_l2"`` (meaning
    ``0.5 * ||z||^2``) or a :class:`FeasibleSet`, which stands for its
    indicator function.
    """
    if not lam > 0:
        raise ValueError("prox parameter must be positive")
    if isinstance(g, FeasibleSet):
        return g.project(v)
    v = as_point(v)
    if g == "l1_norm":
        return np.maximum(v - lam, 0.0) - np.maximum(-v - lam, 0.0)
    if g == "l2_norm":
        nv = np.linalg.norm(v)
        if nv <= lam:
            return np.zeros_like(v)
        return v * (1.0 - lam / nv)
    if g == "squared_l2":
        return v / (1.0 + lam)
    raise UnsupportedOperatorError(f"no closed-form prox for {g!r}")


prox_catalog = prox


def _subgradient_contains(g: ProxSpec, z: np.ndarray, c: np.ndarray, tol: float) -> bool:
    if isinstance(g, FeasibleSet):
        return g.normal_cone_gap(z, c) <= tol
    if g == "l1_norm":
        nz = z != 0
        ok_nz = np.all(np.abs(c[nz] - np.sign(z[nz])) <= tol)
        ok_z = np.all(np.abs(c[~nz]) <= 1 + tol)
        return bool(ok_nz and ok_z)
    if g == "l2_norm":
        nz = np.linalg.norm(z)
        if nz == 0:
            return bool(np.linalg.norm(c) <= 1 + tol)
        return bool(np.linalg.norm(c - z / nz) <= tol)
    if g == "squared_l2":
        return bool(np.linalg.norm(c - z) <= tol * (1 + np.linalg.norm(z)))
    raise UnsupportedOperatorError(f"no subdifferential membership for {g!r}")


# ---------------------------------------------------------------------------
# operators


@dataclass(frozen=True, eq=False)
class SingleValuedOperator:
    """Single-valued map ``F`` with a declared (not verified) Lipschitz constant."""

    fn: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    name: str = "F"

    def __post_init__(self):
        if not self.lipschitz > 0:
            raise ValueError("Lipschitz constant must be positive")

    def __call__(self, z) -> np.ndarray:
        return np.asarray(self.fn(z), dtype=np.float64)


@dataclass(frozen=True, eq=False)
class MaximalMonotoneOperator:
    """Maximally monotone ``A`` represented through its resolvent.

    ``kind`` is ``"zero"``, ``"normal_cone"`` (with ``feasible_set``),
    ``"subgradient"`` (with a prox-catalog entry in ``g``) or ``"custom"``
    (with a ``resolvent_fn(eta, x)`` callback and optionally ``contains_fn``).
    """

    kind: str
    feasible_set: Optional[FeasibleSet] = None
    g: Optional[ProxSpec] = None
    resolvent_fn: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    contains_fn: Optional[Callable[[np.ndarray, np.ndarray], bool]] = None

    @classmethod
    def zero(cls) -> "MaximalMonotoneOperator":
        return cls("zero")

    @classmethod
    def normal_cone(cls, feasible_set: FeasibleSet) -> "MaximalMonotoneOperator":
        return cls("normal_cone", feasible_set=feasible_set)

    @classmethod
    def subgradient(cls, g: ProxSpec) -> "MaximalMonotoneOperator":
        if isinstance(g, FeasibleSet):
            return cls.normal_cone(g)
        if g not in PROX_NAMES:
            raise UnsupportedOperatorError(f"no closed-form prox for {g!r}")
        return cls("subgradient", g=g)

    @classmethod
    def custom(cls, resolvent_fn=None, contains_fn=None) -> "MaximalMonotoneOperator":
        return cls("custom", resolvent_fn=resolvent_fn, contains_fn=contains_fn)

    def resolvent(self, eta: float, x) -> np.ndarray:
        """``J_{eta A}(x) = (I + eta A)^{-1}(x)``."""
        if not eta > 0:
            raise ValueError("resolvent parameter must be positive")
        if self.kind == "zero":
            return as_point(x).copy()
        if self.kind == "normal_cone":
            return self.feasible_set.project(x)
        if self.kind == "subgradient":
            return prox(self.g, eta, x)
        if self.resolvent_fn is None:
            raise UnsupportedOperatorError("custom operator has no resolvent callback")
        return as_point(self.resolvent_fn(eta, as_point(x)))

    def contains(self, z, c, tol: float = 1e-10) -> bool:
        """Whether ``c`` belongs to ``A(z)`` (up to ``tol``)."""
        z = as_point(z)
        c = as_point(c, z.shape[0])
        if self.kind == "zero":
            return bool(np.all(np.abs(c) <= tol))
        if self.kind == "normal_cone":
            return self.feasible_set.normal_cone_gap(z, c) <= tol
        if self.kind == "subgradient":
            return _subgradient_contains(self.g, z, c, tol)
        if self.contains_fn is None:
            raise UnsupportedOperatorError("custom operator has no membership query")
        return bool(self.contains_fn(z, c))

    @property
    def effective_set(self) -> Optional[FeasibleSet]:
        """Feasible set whose normal cone this operator is, if any."""
        if self.kind == "zero":
            return FeasibleSet.full_space()
        if self.kind == "normal_cone":
            return self.feasible_set
        return None

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.feasible_set is not None:
            out["set"] = self.feasible_set.describe()
        if isinstance(self.g, str):
            out["g"] = self.g
        return out


def resolvent_apply(A: MaximalMonotoneOperator, eta: float, x) -> np.ndarray:
    return A.resolvent(eta, x)


# ---------------------------------------------------------------------------
# problems

REGIME_KINDS = ("monotone", "comonotone", "weak_mvi")


@dataclass(frozen=True, eq=False)
class Regime:
    """Structural assumption on ``F + A``.

    ``rho`` is the comonotonicity / weak-MVI parameter; it is 0 for
    ``"monotone"``. A positive ``rho`` for ``"comonotone"`` means cocoercive.
    """

    kind: str = "monotone"
    rho: float = 0.0
    anchor: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in REGIME_KINDS:
            raise ValueError(f"unknown regime {self.kind!r}")
        if self.kind == "monotone" and self.rho != 0:
            raise ValueError("monotone regime has rho = 0")
        if self.kind == "weak_mvi" and self.rho > 0:
            raise ValueError("weak MVI needs rho <= 0")

    @property
    def effective_rho(self) -> float:
        """``rho`` clipped at 0, since rho > 0 implies the rho = 0 condition."""
        return min(self.rho, 0.0)


@dataclass(frozen=True, eq=False)
class InclusionProblem:
    """Find ``z`` with ``0 in F(z) + A(z)``."""

    F: SingleValuedOperator
    A: MaximalMonotoneOperator
    dim: int
    regime: Regime = field(default_factory=Regime)
    known_solution: Optional[np.ndarray] = None
    name: str = "problem"
    params: dict = field(default_factory=dict)
    default_start: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.known_solution is not None:
            zs = as_point(self.known_solution, self.dim)
            res = np.linalg.norm(zs - self.A.resolvent(1.0, zs - self.F(zs)))
            if res > 1e-9:
                raise ValueError(f"known_solution has natural residual {res:.3e} > 1e-9")

    @property
    def L(self) -> float:
        return self.F.lipschitz

    @property
    def anchor(self) -> Optional[np.ndarray]:
        if self.regime.anchor is not None:
            return as_point(self.regime.anchor, self.dim)
        return self.known_solution

    def start_point(self) -> np.ndarray:
        if self.default_start is not None:
            return self.default_start.copy()
        return self.A.resolvent(1.0, np.ones(self.dim))

    def describe(self) -> dict:
        return {
            "name": self.name,
            "params": dict(self.params),
            "dim": self.dim,
            "lipschitz": self.L,
            "regime": {"kind": self.regime.kind, "rho": self.regime.rho},
            "A": self.A.describe(),
        }


def _antidiagonal_signs(n: int) -> np.ndarray:
    # row i (1-based) pairs with column n+1-i: +1 above the antidiagonal midpoint, -1 below
    i = np.arange(1, n + 1)
    return np.where(n + 1 - i > i, 1.0, np.where(n + 1 - i < i, -1.0, 0.0))


def antidiagonal_operator(n: int) -> SingleValuedOperator:
    signs = _antidiagonal_signs(n)

    def fn(z):
        return signs * np.asarray(z, dtype=np.float64)[::-1]

    return SingleValuedOperator(fn, 1.0, name=f"antidiagonal{n}")


def make_antidiagonal_problem(n: int) -> InclusionProblem:
    """Unconstrained bilinear test problem ``F(z) = Mz`` with an antisymmetric
    antidiagonal ``M``; its unique zero is the origin when ``n`` is even."""
    if not isinstance(n, (int, np.integer)) or n <= 0 or n % 2:
        raise ValueError(f"antidiagonal problem needs an even positive n, got {n!r}")
    n = int(n)
    return InclusionProblem(
        F=antidiagonal_operator(n),
        A=MaximalMonotoneOperator.zero(),
        dim=n,
        regime=Regime("monotone"),
        known_solution=np.zeros(n),
        name="antidiagonal",
        params={"n": n},
        default_start=np.ones(n),
    )


def make_bilinear_box_problem(n: int = 2, lower: float = -1.0, upper: float = 1.0) -> InclusionProblem:
    """Antidiagonal ``F`` restricted to the box ``[lower, upper]^n`` (a monotone VI)."""
    if not isinstance(n, (int, np.integer)) or n <= 0 or n % 2:
        raise ValueError(f"bilinear box problem needs an even positive n, got {n!r}")
    if not lower <= 0 <= upper:
        raise ValueError("box must contain the origin, which is the reference solution")
    n = int(n)
    box = FeasibleSet.box(lower, upper, dim=n)
    return InclusionProblem(
        F=antidiagonal_operator(n),
        A=MaximalMonotoneOperator.normal_cone(box),
        dim=n,
        regime=Regime("monotone"),
        known_solution=np.zeros(n),
        name="bilinear_box",
        params={"n": n, "lower": float(lower), "upper": float(upper)},
        default_start=box.project(np.ones(n)),
    )


def make_rotation_problem(L: float, theta: Optional[float] = None, *,
                          costheta: Optional[float] = None) -> InclusionProblem:
    """Scaled planar rotation ``F(z) = L * R_theta z``.

    ``<Fu - Fv, u - v> = (cos(theta)/L) ||Fu - Fv||^2`` holds with equality,
    so the operator is exactly ``cos(theta)/L``-comonotone. Pass either
    ``theta`` in ``[pi/2, pi)`` or ``costheta`` in ``(-1, 0]``; the latter keeps
    ``rho`` bit-exact for boundary cases such as ``rho = -1/(60 L)``.
    """
    if not L > 0:
        raise ValueError("L must be positive")
    if (theta is None) == (costheta is None):
        raise ValueError("give exactly one of theta, costheta")
    if costheta is None:
        if not (math.pi / 2 <= theta < math.pi):
            raise ValueError(f"theta must lie in [pi/2, pi), got {theta!r}")
        c = math.cos(theta)
        s = math.sin(theta)
        if abs(c) < 1e-15:
            c = 0.0
    else:
        c = float(costheta)
        if not (-1.0 < c <= 0.0):
            raise ValueError(f"cos(theta) must lie in (-1, 0], got {c!r}")
        s = math.sqrt(1.0 - c * c)
        theta = math.acos(c)
    M = L * np.array([[c, -s], [s, c]])

    def fn(z):
        return M @ np.asarray(z, dtype=np.float64)

    rho = c / L
    regime = Regime("monotone") if rho == 0 else Regime("comonotone", rho=rho)
    return InclusionProblem(
        F=SingleValuedOperator(fn, float(L), name="rotation"),
        A=MaximalMonotoneOperator.zero(),
        dim=2,
        regime=regime,
        known_solution=np.zeros(2),
        name="rotation",
        params={"L": float(L), "theta": float(theta), "costheta": c},
        default_start=np.ones(2),
    )


# ---------------------------------------------------------------------------
# regime certification

CERTIFY_PROPERTIES = ("lipschitz", "monotone", "comonotone", "weak_mvi")


@dataclass
class CertifyReport:
    """Outcome of a sampled check of a structural property.

    ``worst_margin`` is the smallest sampled slack of the defining inequality
    divided by its natural scale (for instance ``||u-u'|| ||z-z'||``), so it is
    dimensionless; the check passes when it is ``>= -tol``.
    """

    property: str
    passed: bool
    worst_margin: float
    witness: tuple
    samples: int
    rho: float
    tol: float

    def row(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} certify[{self.property}] rho={self.rho:.6g} "
                f"worst_margin={self.worst_margin:.3e} samples={self.samples}")


def _graph_point(problem: InclusionProblem, x: np.ndarray):
    z = problem.A.resolvent(1.0, x)
    return z, problem.F(z) + (x - z)


def certify_regime(problem: InclusionProblem, prop: str, samples: int = 10_000,
                   radius: float = 10.0, seed: int = 0, rho: Optional[float] = None,
                   tol: float = 1e-10) -> CertifyReport:
    """Sample the defining inequality of ``prop`` for ``E = F + A``.

    Points are drawn uniformly from the L-inf ball of ``radius`` around the
    anchor (or the origin). Graph elements of ``E`` come from resolvent
    steps: ``z = J_A(x)`` and ``u = F(z) + (x - z)``. ``rho`` defaults to the
    problem's declared regime parameter.
    """
    if prop not in CERTIFY_PROPERTIES:
        raise ValueError(f"unknown property {prop!r}")
    if rho is None:
        rho = 0.0 if prop == "monotone" else problem.regime.rho
    anchor = problem.anchor
    if prop == "weak_mvi" and anchor is None:
        raise MissingAnchorError("weak MVI certification needs known_solution or a regime anchor")
    rng = np.random.default_rng(seed)
    n = problem.dim
    center = np.zeros(n) if anchor is None else anchor
    worst = math.inf
    witness: tuple = ()
    for _ in range(samples):
        x1 = center + rng.uniform(-radius, radius, size=n)
        x2 = center + rng.uniform(-radius, radius, size=n)
        if prop == "lipschitz":
            d = np.linalg.norm(x1 - x2)
            du = np.linalg.norm(problem.F(x1) - problem.F(x2))
            margin, scale = problem.L * d - du, problem.L * d
            pair = (x1, x2)
        elif prop == "weak_mvi":
            z, u = _graph_point(problem, x1)
            margin = u @ (z - anchor) - rho * (u @ u)
            scale = np.linalg.norm(u) * max(np.linalg.norm(z - anchor), abs(rho) * np.linalg.norm(u))
            pair = (z, anchor)
        else:
            z, u = _graph_point(problem, x1)
            zp, up = _graph_point(problem, x2)
            du = u - up
            dz = z - zp
            margin = du @ dz - rho * (du @ du)
            scale = np.linalg.norm(du) * max(np.linalg.norm(dz), abs(rho) * np.linalg.norm(du))
            pair = (z, zp)
        rel = margin / scale if scale > 0 else 0.0
        if rel < worst:
            worst = rel
            witness = tuple(p.copy() for p in pair)
    return CertifyReport(prop, bool(worst >= -tol), float(worst), witness, samples, float(rho), tol)


# ---------------------------------------------------------------------------
# registry used by the harness

PROBLEM_FACTORIES = {
    "antidiagonal": make_antidiagonal_problem,
    "rotation": make_rotation_problem,
    "bilinear_box": make_bilinear_box_problem,
}


def build_problem(name: str, **params) -> InclusionProblem:
    """Construct a named built-in problem from keyword parameters."""
    if name not in PROBLEM_FACTORIES:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEM_FACTORIES)}")
    if name in ("antidiagonal", "bilinear_box") and "n" in params:
        params["n"] = int(params["n"])
    if name == "bilinear_box" and "bounds" in params:
        lo, hi = params.pop("bounds")
        params["lower"], params["upper"] = lo, hi
    return PROBLEM_FACTORIES[name](**params)
