"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented exit statuses without a lookup table.
"""


class CascadiaError(Exception):
    exit_code = 2


class UsageError(CascadiaError):
    exit_code = 1


class ValidationError(CascadiaError, ValueError):
    exit_code = 2


class MalformedGraph(ValidationError):
    pass


class InvalidLoadingFactor(ValidationError):
    pass


class PreconditionViolated(ValidationError):
    pass


class InvalidGamma(ValidationError):
    pass


class BudgetExceeded(ValidationError):
    pass


class Inapplicable(ValidationError):
    """The tie characterization does not cover this cascade state."""


class NumericalError(CascadiaError, ArithmeticError):
    exit_code = 3


class NumericalFailure(NumericalError):
    pass


class NoStabilization(NumericalError):
    pass


class InsufficientData(NumericalError):
    pass
