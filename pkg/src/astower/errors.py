"""Exceptions shared across the package.

Every failure of a soundness check raises; no operation returns silently
wrong data.
"""


class AstowerError(Exception):
    """Base class for all package errors."""


class VariableMismatch(AstowerError):
    """Two series over different variable pairs were combined."""


class DuplicateTerm(AstowerError):
    """An exponent pair appeared twice in series construction input."""


class NotAUnit(AstowerError):
    """Inversion was requested for a series with zero constant term."""


class NotLocal(AstowerError):
    """A substitution map has a nonzero constant term."""


class PrecisionExhausted(AstowerError):
    """An operation would need coefficients beyond the tracked precision."""


class Indeterminate(AstowerError):
    """The question cannot be decided from a series that is zero up to precision."""


class FieldTooSmall(AstowerError):
    """The configured coefficient field has no element with the required property."""


class DegenerateTranslation(AstowerError):
    """A translation constant that must be nonzero came out zero."""


class NotPrincipalPowerOfX(AstowerError):
    """A Jacobian determinant is not a power of x times a unit up to precision."""


class FormulaMismatch(AstowerError):
    """Predicted exponent or type disagrees with the recomputed oracle value.

    This is a hard failure: it signals an implementation bug, never bad input.
    """


class SearchExhausted(AstowerError):
    """No step parameters satisfy the required inequalities within the bound."""


class ShapeError(AstowerError):
    """A series that must be a monomial times a unit is not, up to precision."""


class ValueTie(AstowerError):
    """A series value is not decided by a unique value-minimal monomial."""


class UnhandledBranch(AstowerError):
    """The monomialization case analysis hit a configuration needing review."""
