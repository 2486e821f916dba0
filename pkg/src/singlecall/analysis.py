"""Numerical audits of the potential-function arguments behind RG, ARG and OG.

Every audit reads recorded trajectory data only; nothing is re-solved. A
report's ``worst_violation`` is the largest value of ``lhs - rhs`` over the
checked inequalities, so negative numbers mean slack and the audit passes
when it does not exceed ``tolerance``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .algorithms import Trajectory, og_constant
from .errors import (
    InvalidWindowError,
    MissingSolutionError,
    WrongAlgorithmError,
)
from .residuals import restricted_gap, tangent_residual_exact

REL_TOL = 1e-9


@dataclass
class AuditReport:
    audit_name: str
    passed: bool
    worst_violation: float
    worst_iteration: int
    constants: dict = field(default_factory=dict)
    tolerance: float = 0.0
    notes: list = field(default_factory=list)

    def row(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        consts = " ".join(f"{k}={v:.6g}" for k, v in self.constants.items())
        line = (f"{status} {self.audit_name}: worst_violation={self.worst_violation:.3e} "
                f"at t={self.worst_iteration} tol={self.tolerance:.1e}")
        if consts:
            line += f" [{consts}]"
        for note in self.notes:
            line += f" ({note})"
        return line

    def as_dict(self) -> dict:
        return {
            "audit_name": self.audit_name,
            "passed": self.passed,
            "worst_violation": self.worst_violation,
            "worst_iteration": self.worst_iteration,
            "constants": dict(self.constants),
            "tolerance": self.tolerance,
            "notes": list(self.notes),
        }


def _report(name, violations: np.ndarray, iterations: Sequence[int], tol: float,
            constants: Optional[dict] = None, notes=None) -> AuditReport:
    violations = np.asarray(violations, dtype=float)
    if violations.size == 0:
        worst, where = 0.0, 0
    else:
        i = int(np.argmax(violations))
        worst, where = float(violations[i]), int(iterations[i])
    return AuditReport(name, bool(worst <= tol), worst, where, constants or {}, tol, list(notes or []))


def _require(traj: Trajectory, *algorithms: str):
    if traj.algorithm not in algorithms:
        raise WrongAlgorithmError(f"expected a trajectory from {algorithms}, got {traj.algorithm!r}")


def _solution(traj: Trajectory) -> np.ndarray:
    zs = traj.problem.known_solution
    if zs is None:
        raise MissingSolutionError("this audit needs problem.known_solution")
    return zs


def _sq(v) -> float:
    return float(v @ v)


# ---------------------------------------------------------------------------
# potentials


def potential_P(traj: Trajectory, t: int) -> float:
    """RG potential ``||F(z_t) + c_t||^2 + ||F(z_t) - F(z_{t-1/2})||^2`` for ``t >= 1``."""
    _require(traj, "rg")
    if t < 1:
        raise ValueError("potential is defined for t >= 1")
    r = traj.records[t]
    return _sq(r.F_z + r.c) + _sq(r.F_z - r.F_half)


def potential_V(traj: Trajectory, t: int) -> float:
    """ARG potential for ``t >= 1``::

        t(t+1)/2 ||eta(F(z_t) + c_t)||^2 + t(t+1)/2 ||eta F(z_t) - eta F(z_{t-1/2})||^2
            + t <eta(F(z_t) + c_t), z_t - z_0>

    It can be negative; only the inequalities around it are meaningful.
    """
    _require(traj, "arg")
    if t < 1:
        raise ValueError("potential is defined for t >= 1")
    eta = traj.eta
    r = traj.records[t]
    z0 = traj.records[0].z
    a = eta * (r.F_z + r.c)
    b = eta * (r.F_z - r.F_half)
    w = t * (t + 1) / 2.0
    return w * _sq(a) + w * _sq(b) + t * float(a @ (r.z - z0))


def potentials(traj: Trajectory) -> np.ndarray:
    """Potential per record (index ``t``), NaN at ``t = 0``."""
    fn = potential_P if traj.algorithm == "rg" else potential_V
    _require(traj, "rg", "arg")
    out = np.full(len(traj.records), np.nan)
    for t in range(1, len(traj.records)):
        out[t] = fn(traj, t)
    return out


# ---------------------------------------------------------------------------
# lemma audits


def audit_rg_potential(traj: Trajectory, rel_tol: float = REL_TOL) -> AuditReport:
    """``P_{t+1} <= P_t`` for every ``t >= 1``."""
    _require(traj, "rg")
    P = potentials(traj)[1:]
    notes = []
    reg = traj.problem.regime
    if reg.kind != "monotone" and reg.rho < 0:
        notes.append(f"regime mismatch: {reg.kind} rho={reg.rho:g}, monotonicity assumed")
    P1 = P[0] if P.size else 0.0
    tol = rel_tol * max(1.0, P1)
    viol = P[1:] - P[:-1]
    return _report("rg_potential", viol, range(1, len(P)), tol, {"P_1": P1}, notes)


def audit_arg_potential(traj: Trajectory, rel_tol: float = REL_TOL) -> AuditReport:
    """``V_{t+1} <= V_t + ||eta(F(z_{t+1}) + c_{t+1})||^2 / 8`` for every ``t >= 1``."""
    _require(traj, "arg")
    V = potentials(traj)[1:]
    eta = traj.eta
    slack = np.array([_sq(eta * (r.F_z + r.c)) / 8.0 for r in traj.records[2:]])
    V1 = V[0] if V.size else 0.0
    tol = rel_tol * max(1.0, abs(V1))
    viol = V[1:] - V[:-1] - slack
    return _report("arg_potential", viol, range(1, len(V)), tol, {"V_1": V1})


def audit_arg_initial(traj: Trajectory, atol: float = 1e-10) -> AuditReport:
    """First-step bounds of ARG: ``||z_1 - z_0|| <= eta r_tan(z_0)`` (when the
    tangent residual is computable), ``||eta(F(z_1)+c_1)|| <= (1+eta L)||z_1-z_0||``
    and ``V_1 <= 4 ||z_1 - z_0||^2``."""
    _require(traj, "arg")
    if len(traj.records) < 2:
        return _report("arg_initial", np.array([]), [], atol)
    eta, L = traj.eta, traj.problem.L
    r0, r1 = traj.records[0], traj.records[1]
    step = float(np.linalg.norm(r1.z - r0.z))
    viol = []
    notes = []
    fs = traj.problem.A.effective_set
    if fs is None:
        notes.append("tangent residual unavailable; first item skipped")
    elif not fs.contains(r0.z, tol=1e-12):
        notes.append("z_0 outside the feasible set; first item skipped")
    else:
        viol.append(step - eta * tangent_residual_exact(traj.problem, r0.z, F_z=r0.F_z))
    viol.append(float(np.linalg.norm(eta * (r1.F_z + r1.c))) - (1 + eta * L) * step)
    viol.append(potential_V(traj, 1) - 4.0 * step * step)
    return _report("arg_initial", np.array(viol), [1] * len(viol), atol,
                   {"step": step}, notes)


def audit_arg_potential_lower(traj: Trajectory, rel_tol: float = REL_TOL) -> AuditReport:
    """``t(t+1/2)/4 ||eta(F(z_t)+c_t)||^2 <= V_t + ||z* - z_0||^2`` for ``t >= 1``."""
    _require(traj, "arg")
    zs = _solution(traj)
    eta = traj.eta
    z0 = traj.records[0].z
    d2 = _sq(z0 - zs)
    viol = []
    for t in range(1, len(traj.records)):
        r = traj.records[t]
        lhs = t * (t + 0.5) / 4.0 * _sq(eta * (r.F_z + r.c))
        viol.append(lhs - potential_V(traj, t) - d2)
    return _report("arg_potential_lower", np.array(viol), range(1, len(traj.records)),
                   rel_tol * max(1.0, d2), {"dist0_sq": d2})


# ---------------------------------------------------------------------------
# theorem audits


def rg_constants(eta: float, L: float, z0, zs, Fz0) -> tuple:
    """``(H^2, lambda)`` of the RG last-iterate bound."""
    H2 = 4.0 * _sq(z0 - zs) + 13.0 / (L * L) * _sq(Fz0)
    eL = eta * L
    denom = eL * eL * (1.0 - (1.0 + math.sqrt(2.0)) * eL)
    lam = math.sqrt(6.0 * (1.0 + 3.0 * eL * eL) / denom) if denom > 0 else math.inf
    return H2, lam


def _certified(traj: Trajectory) -> np.ndarray:
    return traj.certified()


def _audit_rg_thm(traj: Trajectory, rel_tol: float) -> AuditReport:
    zs = _solution(traj)
    prob = traj.problem
    L, eta = prob.L, traj.eta
    r0 = traj.records[0]
    H2, lam = rg_constants(eta, L, r0.z, zs, r0.F_z)
    H = math.sqrt(H2)
    T = np.arange(1, len(traj.records))
    bound = lam * H * L / np.sqrt(T)
    res = _certified(traj)[1:]
    viol = res - bound
    notes = []
    if prob.A.effective_set is not None:
        gaps = np.array([restricted_gap(prob, 1.0, r.z, F_z=r.F_z).value for r in traj.records[1:]])
        viol = np.maximum(viol, gaps - bound)
    else:
        notes.append("gap check skipped: A is not a normal cone")
    tol = rel_tol * max(1.0, bound[0] if bound.size else 1.0)
    return _report("rg_thm", viol, T, tol, {"H2": H2, "lambda": lam, "L": L, "eta": eta}, notes)


def _audit_arg_thm(traj: Trajectory, rel_tol: float) -> AuditReport:
    zs = _solution(traj)
    eta = traj.eta
    z0 = traj.records[0].z
    if len(traj.records) < 2:
        return _report("arg_thm", np.array([]), [], rel_tol)
    z1 = traj.records[1].z
    H2 = _sq(z0 - zs) + 4.0 * _sq(z1 - z0)
    H = math.sqrt(H2)
    T = np.arange(1, len(traj.records))
    bound = math.sqrt(6.0) * H / (eta * T)
    viol = _certified(traj)[1:] - bound
    tol = rel_tol * max(1.0, bound[0])
    return _report("arg_thm", viol, T, tol, {"H2": H2, "eta": eta})


def _audit_og_thm(traj: Trajectory, rel_tol: float) -> AuditReport:
    zs = _solution(traj)
    prob = traj.problem
    eta, L = traj.eta, prob.L
    rho = prob.regime.effective_rho
    C = og_constant(eta, L, rho)
    recs = traj.records
    if len(recs) < 3:
        return _report("og_thm", np.array([]), [], rel_tol, {"C": C})
    z0, z1, z_half = recs[0].z, recs[1].z, recs[1].z_half
    H2 = _sq(z1 - zs) + 0.25 * _sq(z_half - z0)
    Z = traj.iterates()
    # step_sq[t-1] = ||z_{t+1} - z_t||^2 / eta^2 for t = 1..T
    step_sq = np.sum(np.diff(Z[1:], axis=0) ** 2, axis=1) / (eta * eta)
    T = np.arange(1, step_sq.size + 1)
    best = np.minimum.accumulate(step_sq)
    bound = H2 / (C * eta * eta * T) if C > 0 else np.full(T.shape, -np.inf)
    viol = best - bound
    notes = []
    if C <= 0:
        notes.append("C <= 0: step size outside the guarantee")
    if prob.A.effective_set is not None:
        # residuals of record t+1 sit at z_{t+1/2}
        tan_sq = np.array([r.residuals.tangent_exact ** 2 for r in recs[2:]])
        viol = np.maximum(viol, np.minimum.accumulate(tan_sq) - best)
    tol = rel_tol * max(1.0, bound[0] if C > 0 else 1.0)
    return _report("og_thm", viol, T, tol, {"H2": H2, "C": C, "rho": rho, "eta": eta}, notes)


THEOREMS = {"og_thm": ("og", _audit_og_thm), "arg_thm": ("arg", _audit_arg_thm),
            "rg_thm": ("rg", _audit_rg_thm)}


def audit_theorem_bound(traj: Trajectory, theorem: str, rel_tol: float = REL_TOL) -> AuditReport:
    """Check a convergence-rate bound at every prefix length ``T``.

    ``rg_thm``: ``||F(z_T)+c_T|| <= lambda H L / sqrt(T)`` plus the restricted
    gap (``D = 1``) against the same bound. ``arg_thm``:
    ``||F(z_T)+c_T|| <= sqrt(6) H / (eta T)``. ``og_thm``:
    ``min_{t<=T} ||z_{t+1}-z_t||^2/eta^2 <= H^2 / (C eta^2 T)``.
    """
    if theorem not in THEOREMS:
        raise ValueError(f"unknown theorem {theorem!r}; choose from {sorted(THEOREMS)}")
    algo, fn = THEOREMS[theorem]
    _require(traj, algo)
    return fn(traj, rel_tol)


def audit_best_iterate_sums(traj: Trajectory, rel_tol: float = REL_TOL) -> AuditReport:
    """Prefix sums for RG: ``sum ||z_t - z_{t-1}||^2 <= H^2 / (1 - (1+sqrt2) eta L)``
    and ``sum P_t <= lambda^2 H^2 L^2``."""
    _require(traj, "rg")
    zs = _solution(traj)
    L, eta = traj.problem.L, traj.eta
    r0 = traj.records[0]
    H2, lam = rg_constants(eta, L, r0.z, zs, r0.F_z)
    denom = 1.0 - (1.0 + math.sqrt(2.0)) * eta * L
    Z = traj.iterates()
    moves = np.cumsum(np.sum(np.diff(Z, axis=0) ** 2, axis=1))
    P = np.cumsum(potentials(traj)[1:])
    T = np.arange(1, moves.size + 1)
    bound_moves = H2 / denom if denom > 0 else -math.inf
    bound_P = lam * lam * H2 * L * L
    viol = np.maximum(moves - bound_moves, P - bound_P)
    tol = rel_tol * max(1.0, H2)
    return _report("best_iterate_sums", viol, T, tol,
                   {"H2": H2, "lambda": lam, "move_bound": bound_moves, "potential_bound": bound_P})


AUDITS = {
    "rg_potential": audit_rg_potential,
    "arg_potential": audit_arg_potential,
    "arg_initial": audit_arg_initial,
    "arg_potential_lower": audit_arg_potential_lower,
    "best_iterate_sums": audit_best_iterate_sums,
    "og_thm": lambda tr: audit_theorem_bound(tr, "og_thm"),
    "arg_thm": lambda tr: audit_theorem_bound(tr, "arg_thm"),
    "rg_thm": lambda tr: audit_theorem_bound(tr, "rg_thm"),
}

AUDITS_FOR = {
    "rg": ("rg_potential", "rg_thm", "best_iterate_sums"),
    "arg": ("arg_potential", "arg_initial", "arg_potential_lower", "arg_thm"),
    "og": ("og_thm",),
    "eg": (),
    "peg": (),
}


def run_audit(name: str, traj: Trajectory) -> AuditReport:
    if name not in AUDITS:
        raise ValueError(f"unknown audit {name!r}; choose from {sorted(AUDITS)}")
    return AUDITS[name](traj)


# ---------------------------------------------------------------------------
# algebraic identities


def identity_sides(which: str, x0, x2, y1, y2, y3, y4, u2, u4, k: float = 1, q: float = 0.5):
    """Return ``(lhs, rhs)`` of one of the two sum-of-squares identities.

    ``x3`` and ``x4`` are built from the constraints the identity assumes;
    the ``second`` identity adds the anchoring term ``(x0 - x2)/(k+1)``.
    """
    sq = _sq
    if which == "first":
        x3 = x2 - y1 - u2
        x4 = x2 - y3 - u4
        lhs = (sq(y2 + u2) + sq(y2 - y1) - sq(y4 + u4) - sq(y4 - y3)
               - 2.0 * float((y4 - y2) @ (x4 - x2))
               - 2.0 * (0.25 * sq(x4 - x3) - sq(y4 - y3))
               - 2.0 * float((u4 - u2) @ (x4 - x2)))
        rhs = sq((x3 - x4) / 2.0 + y1 - y2) + sq((x3 + x4) / 2.0 - x2 + y2 + u2)
        return lhs, rhs
    if which == "second":
        anchor = (x0 - x2) / (k + 1)
        x3 = x2 - y1 - u2 + anchor
        x4 = x2 - y3 - u4 + anchor
        lhs = (k * (k + 1) / 2.0 * (sq(y2 + u2) + sq(y2 - y1))
               + k * float((y2 + u2) @ (x2 - x0))
               - (k + 1) * (k + 2) / 2.0 * (sq(y4 + u4) + sq(y4 - y3))
               - (k + 1) * float((y4 + u4) @ (x4 - x0))
               - k * (k + 1) * float((y4 + u4 - y2 - u2) @ (x4 - x2))
               - k * (k + 1) / (4.0 * q) * (q * sq(x4 - x3) - sq(y4 - y3)))
        rhs = (k * (k + 1) / 4.0 * sq(u4 - u2 + y1 - 2.0 * y2 + y3)
               + ((1 - 4 * q) * k - 4 * q) / (4 * q) * (k + 1) * sq(y3 - y4)
               + (k + 1) * float((y3 - y4) @ (y4 + u4)))
        return lhs, rhs
    raise ValueError(f"unknown identity {which!r}")


def verify_identity(which: str, trials: int = 1000, seed: int = 0,
                    dims: Iterable[int] = (8,), q_values: Optional[Sequence[float]] = None,
                    rel_tol: float = REL_TOL) -> AuditReport:
    """Evaluate an identity on random inputs; the violation per trial is
    ``|lhs - rhs| / (1 + |lhs|)``.

    Trials cycle through ``dims``; ``q`` is drawn from (0, 1) unless
    ``q_values`` is given, in which case trials cycle through it.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    dims = list(dims)
    viol = np.empty(trials)
    for i in range(trials):
        n = dims[i % len(dims)]
        x0, x1, x2, y1, y2, y3, y4, u2, u4 = rng.standard_normal((9, n))
        k = int(rng.integers(1, 11))
        q = float(q_values[i % len(q_values)]) if q_values else float(rng.uniform(1e-3, 1.0))
        lhs, rhs = identity_sides(which, x0, x2, y1, y2, y3, y4, u2, u4, k=k, q=q)
        viol[i] = abs(lhs - rhs) / (1.0 + abs(lhs))
    return _report(f"identity_{which}", viol, range(trials), rel_tol,
                   {"trials": trials})


# ---------------------------------------------------------------------------
# sequence recursion


def extremal_sequence(C1: float, p: float, K: int, theta: Optional[np.ndarray] = None) -> np.ndarray:
    """``a_k`` for ``k = 2..K`` with ``k^2/4 a_k = theta_k (C1 + p/(1-p) sum_{t<k} a_t)``.

    ``theta = 1`` saturates the hypothesis; ``theta`` may have a leading batch
    axis to build several sequences at once. Index 0 of the result is ``a_2``.
    """
    ratio = p / (1.0 - p)
    m = K - 1
    if theta is None:
        theta = np.ones(m)
    theta = np.asarray(theta, dtype=float)
    out = np.empty(theta.shape)
    running = np.zeros(theta.shape[:-1])
    for i in range(m):
        k = i + 2
        out[..., i] = theta[..., i] * 4.0 / (k * k) * (C1 + ratio * running)
        running = running + out[..., i]
    return out


def verify_sequence_bound(C1: float, p: float, K: int, random_sequences: int = 100,
                          seed: int = 0) -> AuditReport:
    """Check ``a_k <= 4 C1 / ((1 - 3p) k^2)`` on the saturating sequence and on
    ``random_sequences`` random sequences that satisfy the recursion."""
    if not 0 < p < 1.0 / 3.0:
        raise ValueError(f"p must lie in (0, 1/3), got {p!r}")
    if C1 < 0:
        raise ValueError("C1 must be nonnegative")
    if K < 2:
        raise ValueError("horizon K must be >= 2")
    k = np.arange(2, K + 1)
    bound = 4.0 * C1 / ((1.0 - 3.0 * p) * k * k)
    rng = np.random.default_rng(seed)
    theta = np.vstack([np.ones(K - 1), rng.uniform(0.0, 1.0, size=(random_sequences, K - 1))])
    seqs = extremal_sequence(C1, p, K, theta)
    # relative to the bound itself; zero bound (C1 = 0) demands exact zeros
    scale = np.where(bound > 0, bound, 1.0)
    viol = np.max((seqs - bound) / scale, axis=0)
    return _report("sequence_bound", viol, k, 1e-12,
                   {"C1": C1, "p": p, "K": K, "max_ratio": float(np.max(seqs[0] / scale)) if C1 > 0 else 0.0})


# ---------------------------------------------------------------------------
# empirical rates


@dataclass(frozen=True)
class RateFit:
    slope: float
    r_squared: float


def fit_rate(data, window: tuple) -> RateFit:
    """Least-squares slope of ``log(residual)`` against ``log(t)`` over
    ``window = (t_lo, t_hi)`` inclusive.

    ``data`` is a :class:`Trajectory` (certified residual, falling back to
    the stopping metric) or an array indexed by ``t``.
    """
    if isinstance(data, Trajectory):
        values = data.stop_metrics()
    else:
        values = np.asarray(data, dtype=float)
    lo, hi = int(window[0]), int(window[1])
    if lo < 1 or hi <= lo or hi >= values.size:
        raise InvalidWindowError(f"window {window} does not fit {values.size} values (t >= 1)")
    t = np.arange(lo, hi + 1)
    r = values[lo:hi + 1]
    if not np.all(np.isfinite(r)) or np.any(r <= 0):
        raise InvalidWindowError("residuals in the window must be positive and finite")
    x, y = np.log(t), np.log(r)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), r2)
