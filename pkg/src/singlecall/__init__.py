"""Single-call extragradient-type solvers for monotone and comonotone inclusions.

Solves ``0 in F(z) + A(z)`` with EG, PEG, OG, RG and anchored RG (ARG),
measures residuals, and audits the potential-function inequalities behind
their convergence rates on recorded trajectories.
"""

from .algorithms import (
    ALGORITHMS,
    AdmissibilityWarning,
    AlgorithmConfig,
    SolverState,
    Trajectory,
    TrajectoryRecord,
    run,
    step_arg,
    step_eg,
    step_og,
    step_peg,
    step_rg,
    stepsize_arg,
    stepsize_og,
)
from .analysis import (
    AuditReport,
    RateFit,
    audit_arg_potential,
    audit_best_iterate_sums,
    audit_rg_potential,
    audit_theorem_bound,
    fit_rate,
    potential_P,
    potential_V,
    verify_identity,
    verify_sequence_bound,
)
from .core import (
    FeasibleSet,
    InclusionProblem,
    MaximalMonotoneOperator,
    Regime,
    SingleValuedOperator,
    build_problem,
    certify_regime,
    make_antidiagonal_problem,
    make_bilinear_box_problem,
    make_rotation_problem,
    project,
    prox,
    prox_catalog,
    resolvent_apply,
)
from .errors import (
    DimensionError,
    InfeasiblePointError,
    InfeasibleStepsizeError,
    InvalidWindowError,
    MissingAnchorError,
    MissingSolutionError,
    UnsupportedOperatorError,
    WrongAlgorithmError,
)
from .residuals import (
    GapResult,
    ResidualReport,
    certified_residual,
    forward_backward_residual,
    natural_residual,
    residual_report,
    restricted_gap,
    tangent_residual_exact,
)

__version__ = "0.1.0"
