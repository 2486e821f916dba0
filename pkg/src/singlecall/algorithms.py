"""Extragradient-type solvers as deterministic step engines.

Five methods share one driver, :func:`run`:

``eg``   extragradient, two F calls and two resolvents per iteration
``peg``  past extragradient (Popov), one F call, two resolvents
``og``   optimistic gradient, one F call, one resolvent
``rg``   reflected gradient, one F call, one resolvent
``arg``  reflected gradient with Halpern anchoring towards ``z_0``

Each step returns a fresh :class:`SolverState`. Besides the iterate the state
carries the element ``c`` of ``A`` that the resolvent step certifies, which
is what the residual bounds are stated in terms of.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .core import InclusionProblem, as_point
from .errors import InfeasiblePointError, InfeasibleStepsizeError
from .residuals import ResidualReport, residual_report

ALGORITHMS = ("eg", "peg", "og", "rg", "arg")

# F evaluations and resolvent applications per iteration
CALLS_PER_ITERATION = {
    "eg": (2, 2),
    "peg": (1, 2),
    "og": (1, 1),
    "rg": (1, 1),
    "arg": (1, 1),
}

DIVERGENCE_NORM = 1e12


class AdmissibilityWarning(UserWarning):
    """Step size outside the range covered by the convergence guarantees."""


@dataclass(frozen=True)
class AlgorithmConfig:
    algorithm: str
    eta: float
    max_iterations: int = 1000
    stop_epsilon: float = 0.0
    initial_point: Optional[np.ndarray] = None
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise ValueError(f"eta must be a positive finite number, got {self.eta!r}")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 0:
            raise ValueError(f"max_iterations must be a nonnegative integer, got {self.max_iterations!r}")
        if not self.stop_epsilon >= 0:
            raise ValueError("stop_epsilon must be nonnegative")


@dataclass
class SolverState:
    """Iteration state after ``t`` steps.

    ``z_half`` is the extrapolated point used by the step that produced
    ``z`` (so ``z_{t-1/2}``), and ``F_half`` its operator value. For OG,
    PEG and RG at ``t = 0`` these hold the initialisation conventions
    ``z_{-1/2} = z_0`` / ``z_{-1} = z_0``. ``c`` lies in ``A(z)``, except for
    OG where it lies in ``A(z_half)``.
    """

    t: int
    z: np.ndarray
    z_prev: np.ndarray
    z0: np.ndarray
    z_half: Optional[np.ndarray] = None
    F_half: Optional[np.ndarray] = None
    c: Optional[np.ndarray] = None
    grad_calls: int = 0
    resolvent_calls: int = 0


@dataclass
class TrajectoryRecord:
    t: int
    z: np.ndarray
    z_half: Optional[np.ndarray]
    c: Optional[np.ndarray]
    F_z: np.ndarray
    F_half: Optional[np.ndarray]
    residuals: ResidualReport
    grad_calls: int
    resolvent_calls: int

    @property
    def stop_metric(self) -> float:
        """Certified residual when a certificate exists, else the tangent
        residual, else the natural residual."""
        r = self.residuals
        if r.certified is not None:
            return r.certified
        if r.tangent_exact is not None:
            return r.tangent_exact
        return r.natural


@dataclass
class Trajectory:
    config: AlgorithmConfig
    problem: InclusionProblem
    records: list = field(default_factory=list)
    terminated_by: str = "max_iterations"
    warnings: list = field(default_factory=list)

    @property
    def algorithm(self) -> str:
        return self.config.algorithm

    @property
    def eta(self) -> float:
        return self.config.eta

    @property
    def iterations(self) -> int:
        return self.records[-1].t

    @property
    def gradient_calls(self) -> int:
        return self.records[-1].grad_calls

    @property
    def resolvent_calls(self) -> int:
        return self.records[-1].resolvent_calls

    @property
    def final_residual(self) -> float:
        return self.records[-1].stop_metric

    def certified(self) -> np.ndarray:
        """Certified residuals per record (NaN where no certificate exists)."""
        return np.array([np.nan if r.residuals.certified is None else r.residuals.certified
                         for r in self.records])

    def stop_metrics(self) -> np.ndarray:
        return np.array([r.stop_metric for r in self.records])

    def iterates(self) -> np.ndarray:
        return np.array([r.z for r in self.records])


# ---------------------------------------------------------------------------
# step sizes


def og_constant(eta: float, L: float, rho: float) -> float:
    """``C = 1/2 + 2 rho/eta - 2 eta^2 L^2``; OG's guarantee needs ``C > 0``."""
    return 0.5 + 2.0 * rho / eta - 2.0 * eta * eta * L * L


def arg_condition(eta: float, L: float, rho: float) -> float:
    """Left side of ARG's step-size condition, ``1/2 - (12 - 4 rho/eta) eta^2 L^2 + 2 rho/eta``."""
    return 0.5 - (12.0 - 4.0 * rho / eta) * eta * eta * L * L + 2.0 * rho / eta


def og_rho_bound(L: float) -> float:
    return -1.0 / (12.0 * math.sqrt(3.0) * L)


def arg_rho_bound(L: float) -> float:
    return -1.0 / (60.0 * L)


def rg_eta_bound(L: float) -> float:
    return 1.0 / ((1.0 + math.sqrt(2.0)) * L)


def stepsize_og(L: float, rho: float) -> float:
    """Step size ``1/(2 sqrt(3) L)``, valid for every ``rho > -1/(12 sqrt(3) L)``."""
    if not L > 0:
        raise ValueError("L must be positive")
    rho = min(rho, 0.0)
    bound = og_rho_bound(L)
    if not rho > bound:
        raise InfeasibleStepsizeError(
            f"OG needs rho > -1/(12*sqrt(3)*L) = {bound:.6g}; got rho = {rho:.6g}")
    eta = 1.0 / (2.0 * math.sqrt(3.0) * L)
    assert og_constant(eta, L, rho) > 0
    return eta


def stepsize_arg(L: float, rho: float) -> float:
    """Step size ``1/(12 L)``, valid for every ``rho >= -1/(60 L)``."""
    if not L > 0:
        raise ValueError("L must be positive")
    rho = min(rho, 0.0)
    bound = arg_rho_bound(L)
    if rho < bound:
        raise InfeasibleStepsizeError(
            f"ARG needs rho >= -1/(60*L) = {bound:.6g}; got rho = {rho:.6g}")
    eta = 1.0 / (12.0 * L)
    assert arg_condition(eta, L, rho) >= 0
    assert rho / eta >= -0.25
    return eta


def admissibility_warnings(problem: InclusionProblem, algorithm: str, eta: float) -> list:
    """Reasons why ``eta`` falls outside the guarantee for ``algorithm``."""
    L = problem.L
    rho = problem.regime.effective_rho
    out = []
    if algorithm == "og":
        if not eta < 1.0 / (2.0 * L):
            out.append(f"og: eta={eta:g} not below 1/(2L)={1 / (2 * L):g}")
        if not rho > og_rho_bound(L):
            out.append(f"og: rho={rho:g} not above -1/(12 sqrt3 L)={og_rho_bound(L):g}")
        if not og_constant(eta, L, rho) > 0:
            out.append(f"og: C={og_constant(eta, L, rho):g} is not positive")
    elif algorithm == "arg":
        if rho < arg_rho_bound(L):
            out.append(f"arg: rho={rho:g} below -1/(60L)={arg_rho_bound(L):g}")
        if arg_condition(eta, L, rho) < 0:
            out.append(f"arg: step-size condition value {arg_condition(eta, L, rho):g} < 0")
    elif algorithm == "rg":
        if not eta < rg_eta_bound(L):
            out.append(f"rg: eta={eta:g} not below 1/((1+sqrt2)L)={rg_eta_bound(L):g}")
        if problem.regime.kind != "monotone" and problem.regime.rho < 0:
            out.append("rg: guarantee covers monotone problems only")
    return out


# ---------------------------------------------------------------------------
# steps


def init_state(problem: InclusionProblem, algorithm: str, z0) -> SolverState:
    z0 = as_point(z0, problem.dim).copy()
    state = SolverState(t=0, z=z0, z_prev=z0, z0=z0)
    if algorithm in ("og", "peg"):
        # z_{-1/2} = z_0, and F(z_{-1/2}) is needed by the first step
        state.z_half = z0
        state.F_half = problem.F(z0)
        state.grad_calls = 1
    elif algorithm == "rg":
        state.z_half = z0
    return state


def step_eg(problem: InclusionProblem, eta: float, s: SolverState) -> SolverState:
    J = problem.A.resolvent
    Fz = problem.F(s.z)
    zh = J(eta, s.z - eta * Fz)
    Fh = problem.F(zh)
    x = s.z - eta * Fh
    z1 = J(eta, x)
    return SolverState(s.t + 1, z1, s.z, s.z0, zh, Fh, (x - z1) / eta,
                       s.grad_calls + 2, s.resolvent_calls + 2)


def step_peg(problem: InclusionProblem, eta: float, s: SolverState) -> SolverState:
    J = problem.A.resolvent
    zh = J(eta, s.z - eta * s.F_half)
    Fh = problem.F(zh)
    x = s.z - eta * Fh
    z1 = J(eta, x)
    return SolverState(s.t + 1, z1, s.z, s.z0, zh, Fh, (x - z1) / eta,
                       s.grad_calls + 1, s.resolvent_calls + 2)


def step_og(problem: InclusionProblem, eta: float, s: SolverState) -> SolverState:
    x = s.z - eta * s.F_half
    zh = problem.A.resolvent(eta, x)
    Fh = problem.F(zh)
    z1 = zh + eta * s.F_half - eta * Fh
    # (x - zh)/eta lies in A(zh), hence (z_t - z_{t+1})/eta lies in F(zh) + A(zh)
    return SolverState(s.t + 1, z1, s.z, s.z0, zh, Fh, (x - zh) / eta,
                       s.grad_calls + 1, s.resolvent_calls + 1)


def step_rg(problem: InclusionProblem, eta: float, s: SolverState) -> SolverState:
    zh = 2.0 * s.z - s.z_prev
    Fh = problem.F(zh)
    x = s.z - eta * Fh
    z1 = problem.A.resolvent(eta, x)
    return SolverState(s.t + 1, z1, s.z, s.z0, zh, Fh, (x - z1) / eta,
                       s.grad_calls + 1, s.resolvent_calls + 1)


def step_arg(problem: InclusionProblem, eta: float, s: SolverState) -> SolverState:
    t = s.t
    if t == 0:
        zh = s.z0
        Fh = problem.F(zh)
        x = s.z0 - eta * Fh
    else:
        zh = (2.0 * s.z - s.z_prev + (s.z0 - s.z) / (t + 1) - (s.z0 - s.z_prev) / t)
        Fh = problem.F(zh)
        x = s.z - eta * Fh + (s.z0 - s.z) / (t + 1)
    z1 = problem.A.resolvent(eta, x)
    return SolverState(t + 1, z1, s.z, s.z0, zh, Fh, (x - z1) / eta,
                       s.grad_calls + 1, s.resolvent_calls + 1)


STEPS: dict = {
    "eg": step_eg,
    "peg": step_peg,
    "og": step_og,
    "rg": step_rg,
    "arg": step_arg,
}


def make_record(problem: InclusionProblem, algorithm: str, s: SolverState, eta: float,
                alpha: float = 1.0) -> TrajectoryRecord:
    F_z = problem.F(s.z)
    if algorithm == "og" and s.t > 0:
        # OG's guarantee is about the half point
        rep = residual_report(problem, s.z_half, c=s.c, alpha=alpha, F_z=s.F_half)
        rep = replace(rep, certified=float(np.linalg.norm(s.z_prev - s.z) / eta))
    else:
        rep = residual_report(problem, s.z, c=s.c, alpha=alpha, F_z=F_z)
    return TrajectoryRecord(s.t, s.z, s.z_half, s.c, F_z, s.F_half, rep,
                            s.grad_calls, s.resolvent_calls)


def _diverged(z: np.ndarray) -> bool:
    return not np.all(np.isfinite(z)) or np.linalg.norm(z) > DIVERGENCE_NORM


def run(problem: InclusionProblem, config: AlgorithmConfig,
        callback: Optional[Callable[[TrajectoryRecord], None]] = None) -> Trajectory:
    """Iterate ``config.algorithm`` on ``problem``.

    Stops after ``max_iterations`` steps, when the record's stopping metric
    drops to ``stop_epsilon`` (if positive), or when an iterate leaves the
    ball of radius 1e12 / becomes non-finite (``terminated_by="divergence"``).
    Step sizes outside the theory trigger an :class:`AdmissibilityWarning`
    but the run proceeds.
    """
    algo = config.algorithm
    eta = float(config.eta)
    z0 = problem.start_point() if config.initial_point is None else config.initial_point
    z0 = as_point(z0, problem.dim)
    fs = problem.A.effective_set
    if algo in ("eg", "peg", "rg") and fs is not None and not fs.contains(z0, tol=1e-12):
        raise InfeasiblePointError(f"{algo} must start inside the feasible set")

    traj = Trajectory(config=config, problem=problem)
    for msg in admissibility_warnings(problem, algo, eta):
        traj.warnings.append(msg)
        warnings.warn(msg, AdmissibilityWarning, stacklevel=2)

    step = STEPS[algo]
    state = init_state(problem, algo, z0)
    eps = config.stop_epsilon
    with np.errstate(over="ignore", invalid="ignore"):
        rec = make_record(problem, algo, state, eta)
        traj.records.append(rec)
        if callback:
            callback(rec)
        if eps > 0 and rec.stop_metric <= eps:
            traj.terminated_by = "epsilon"
            return traj
        for _ in range(int(config.max_iterations)):
            state = step(problem, eta, state)
            rec = make_record(problem, algo, state, eta)
            traj.records.append(rec)
            if callback:
                callback(rec)
            if _diverged(state.z):
                traj.terminated_by = "divergence"
                break
            if eps > 0 and rec.stop_metric <= eps:
                traj.terminated_by = "epsilon"
                break
    return traj
