"""Exception types raised by the library.

Every error subclasses :class:`ChowLiuError` so callers (the CLI in
particular) can map failures onto exit codes without matching messages.
"""


class ChowLiuError(Exception):
    """Base class for all library errors."""


class ValidationError(ChowLiuError, ValueError):
    """An input violates a documented invariant."""


class InvalidIndexError(ValidationError):
    pass


class OutOfRangeSymbolError(ValidationError):
    pass


class EmptySampleError(ValidationError):
    pass


class SupportViolationError(ValidationError):
    """q(x) > 0 where p(x) = 0 in a KL divergence."""


class ZeroMarginalError(ValidationError):
    pass


class NotStrictlyPositiveError(ValidationError):
    pass


class TooLargeError(ValidationError):
    pass


class CyclicInputError(ValidationError):
    pass


class DisconnectedInputError(ValidationError):
    pass


class DegenerateInformationDensityError(ValidationError):
    """Var(s_e' - s_e) vanishes while the mutual informations differ."""


class SolverNonConvergenceError(ChowLiuError):
    """Every restart of the crossover solver failed its tolerances.

    ``best`` carries the best candidate found so callers can still inspect it.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ParseError(ChowLiuError):
    """A model or sample file is malformed. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line
