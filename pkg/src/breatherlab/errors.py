"""Exception types shared across the package."""


class StructureError(ValueError):
    """Operands are structurally incompatible (vars, orders, lengths)."""


class PreconditionError(ValueError):
    """A documented precondition of the operation is violated."""


class DegenerateParameterError(ValueError):
    """Parameters make the ansatz or a normalization degenerate."""


class ExistenceConditionError(ValueError):
    """A closed-form solution's existence condition fails."""


class SingularConfigurationError(ValueError):
    """A closed-form evaluation hit a singular configuration."""


class DivergenceError(RuntimeError):
    """The time integration blew past the instability threshold."""


class BracketFailureError(RuntimeError):
    """Shooting/bisection could not bracket a decaying solution."""
