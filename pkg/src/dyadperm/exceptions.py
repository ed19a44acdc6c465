"""Exception hierarchy.

Input problems derive from :class:`DyadValidationError` (a ``ValueError``);
numerical failures such as singular designs or constant networks derive
from :class:`DyadNumericalError` (an ``ArithmeticError``). The CLI maps the
two families to different exit codes.
"""


class DyadValidationError(ValueError):
    """Malformed dyadic input."""


class NotSquareError(DyadValidationError):
    pass


class AsymmetricError(DyadValidationError):
    pass


class NonzeroDiagonalError(DyadValidationError):
    pass


class TooSmallError(DyadValidationError):
    pass


class NonFiniteEntryError(DyadValidationError):
    pass


class DimensionMismatchError(DyadValidationError):
    pass


class PermutationError(DyadValidationError):
    """Invalid permutation: wrong length or not a bijection."""


class EmptyReplicatesError(DyadValidationError):
    pass


class UnknownSpecError(DyadValidationError):
    pass


class ParseError(DyadValidationError):
    def __init__(self, message, *, line=None, column=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.column = column


class ConflictingDuplicateEdgeError(ParseError):
    pass


class SelfLoopError(ParseError):
    pass


class UnknownLabelError(ParseError):
    pass


class DyadNumericalError(ArithmeticError):
    """A quantity needed by an estimator is zero or ill-conditioned."""


class DegenerateMatrixError(DyadNumericalError):
    def __init__(self, message, *, which=None):
        super().__init__(message)
        self.which = which


class ZeroVarianceError(DyadNumericalError):
    pass


class SingularDesignError(DyadNumericalError):
    pass


class SingularVarianceError(DyadNumericalError):
    pass


class NoClosedFormError(DyadNumericalError):
    pass


class BudgetWarning(UserWarning):
    """Monte Carlo permutation budget below the recommended minimum."""
