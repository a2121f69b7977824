"""Exception hierarchy of the toolkit."""


class LambdaESError(Exception):
    """Base class for every error raised by the toolkit."""


class InvalidInputError(LambdaESError):
    """Malformed distribution, level, Lambda spec, scenario matrix or input file."""


class ZeroProbabilityEventError(LambdaESError, ValueError):
    """Conditioning on an event of probability zero."""


class PreconditionError(LambdaESError, ValueError):
    """An operation was called outside its precondition."""


class ContinuityError(PreconditionError):
    """Lambda lacks the one-sided continuity the operation relies on."""


class InfeasibleProblemError(LambdaESError):
    """The optimisation problem has no feasible point."""


class UnboundedProblemError(LambdaESError):
    """The linear program is unbounded below."""


class IterationLimitError(LambdaESError):
    """The simplex method exceeded its pivot guard."""
