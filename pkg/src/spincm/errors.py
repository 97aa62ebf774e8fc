"""Exception types shared across the package."""


class SpincmError(Exception):
    """Base class for all package-specific errors."""


class UnsupportedAlgebraError(SpincmError):
    """Requested algebra series/rank is not implemented."""


class DimensionError(SpincmError):
    """Operands belong to different algebras or have inconsistent shapes."""


class DomainViolationError(SpincmError):
    """A Cartan point sits on (or too close to) a pole of the r-matrix."""


class PreconditionError(SpincmError):
    """An operation-specific precondition on the input state failed."""


class OutOfChartError(SpincmError):
    """Spin coefficients left the real chart of the torus map (must stay > 0)."""


class BigCellError(SpincmError):
    """Group element left the open dense cell where the factorization exists."""


class PatternError(SpincmError):
    """Matrix violates the zero pattern required by the chart."""


class PathBreakdownError(SpincmError):
    """Eigenvalue path hit a collision or left the real simple-spectrum regime."""


class BranchError(SpincmError):
    """Matrix logarithm left the real positive branch."""


class AccuracyError(SpincmError):
    """Quadrature/differentiation error estimate exceeds the tolerance."""


class ValidationError(SpincmError):
    """Run configuration failed validation (field-level message in args)."""
