"""Exception hierarchy shared by all ptframe modules."""


class PTFrameError(Exception):
    """Base class for every error raised by ptframe."""


class DimensionError(PTFrameError, ValueError):
    """Operands have incompatible shapes."""


class LayoutError(PTFrameError, ValueError):
    """A subsystem index or layout does not fit the requested operation."""


class ParameterError(PTFrameError, ValueError):
    """Model parameters violate their invariants."""


class SingularPointError(ParameterError):
    """Parameters sit on a point where the model or the supermode map is singular."""


class NumericalError(PTFrameError, ArithmeticError):
    """A numerical routine failed or its result cannot be trusted."""


class EigenSolverError(NumericalError):
    """The eigenvalue iteration did not converge."""


class IllConditionedError(NumericalError):
    """An operator is too ill-conditioned for the requested computation."""


class NearEPError(NumericalError):
    """Eigenvector matching was requested too close to an exceptional point."""
