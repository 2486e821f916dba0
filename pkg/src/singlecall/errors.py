"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Vector shapes do not agree."""


class UnsupportedOperatorError(NotImplementedError):
    """The requested operation is not available for this operator kind."""


class MissingAnchorError(ValueError):
    """A weak-MVI check was requested without a reference solution."""


class MissingSolutionError(ValueError):
    """An audit needs ``problem.known_solution`` but none was given."""


class InfeasibleStepsizeError(ValueError):
    """No admissible step size exists for the requested regime parameter."""


class InfeasiblePointError(ValueError):
    """A point expected to lie in the feasible set does not."""


class WrongAlgorithmError(ValueError):
    """An analysis routine received a trajectory from the wrong algorithm."""


class InvalidWindowError(ValueError):
    """A rate-fit window contains no usable (positive) residuals."""
