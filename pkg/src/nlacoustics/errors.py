"""Exception hierarchy shared across the package.

Two families matter to callers: ``ValidationError`` for rejected inputs
(bad grids, incompatible data, malformed files) and ``SolverAbort`` for
runs that started but had to stop (degeneracy, blow-up, NaN, stagnation).
The command-line driver maps them to exit codes 2 and 3 respectively.
"""


class ValidationError(ValueError):
    """Input rejected before any stepping happened."""


class UnsupportedAxisError(ValidationError):
    """Operation asked for on an axis kind it does not support."""


class MeanViolationError(ValidationError):
    """Field is not mean-free along a periodic axis that requires it."""


class CompatibilityError(ValidationError):
    """Boundary data does not match the initial data traces."""


class SolverAbort(RuntimeError):
    """A time/march integration stopped before reaching its horizon."""


class DegeneracyAbort(SolverAbort):
    """Quasilinear factor left the admissible range; data too large."""


class BlowUpAbort(SolverAbort):
    """State norm grew past the configured blow-up guard."""


class RegimeNotReachedError(SolverAbort):
    """Periodic regime extraction did not converge within its budget."""


class InversionFailureError(SolverAbort):
    """Fixed-point inversion of an algebraic ansatz did not contract."""
