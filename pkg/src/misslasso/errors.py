"""Exception and warning classes.

Every error carries a short ``code`` (used as the greppable prefix on the CLI
error stream) and an ``exit_status``: 2 usage, 3 data, 4 numeric.
"""


class MissLassoError(Exception):
    code = "E_GENERIC"
    exit_status = 1


class UsageError(MissLassoError):
    code = "E_USAGE"
    exit_status = 2


class DataError(MissLassoError):
    code = "E_DATA"
    exit_status = 3


class NumericError(MissLassoError):
    code = "E_NUMERIC"
    exit_status = 4


# validation / data shape
class DimensionMismatch(DataError):
    code = "E_DIMENSION_MISMATCH"


class NonFiniteObservedEntry(DataError):
    code = "E_NONFINITE_OBSERVED"


class MissingEntryAccess(DataError):
    code = "E_MISSING_ENTRY_ACCESS"


class UnreadableInput(DataError):
    code = "E_UNREADABLE_INPUT"


class EmptyTable(DataError):
    code = "E_EMPTY_TABLE"


# parameter ranges
class InvalidDimension(UsageError):
    code = "E_INVALID_DIMENSION"


class PhiOutOfRange(UsageError):
    code = "E_PHI_OUT_OF_RANGE"


class AlphaOutOfRange(UsageError):
    code = "E_ALPHA_OUT_OF_RANGE"


class MissingInput(UsageError):
    code = "E_MISSING_INPUT"


class MethodRequirementsMissing(UsageError):
    code = "E_METHOD_REQUIREMENTS"


class NodeObserved(UsageError):
    code = "E_NODE_OBSERVED"


# numerics
class NotPositiveDefinite(NumericError):
    code = "E_NOT_POSITIVE_DEFINITE"


class DegenerateDenominator(NumericError):
    code = "E_DEGENERATE_DENOMINATOR"


class SingularBlanketSystem(NumericError):
    code = "E_SINGULAR_BLANKET"


class SingularSystem(NumericError):
    code = "E_SINGULAR_SYSTEM"


class MaxIterExceeded(UserWarning):
    """Solver hit ``max_iter``; the returned fit has ``converged=False``."""


class ZeroResidualDegenerate(UserWarning):
    """Square-root LASSO reached an exact interpolation (zero residual)."""


class SupercriticalRegime(UserWarning):
    """(1 - alpha)(d_max - 1) >= 1: blanket sizes need not be finite."""
