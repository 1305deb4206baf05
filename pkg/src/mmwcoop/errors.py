"""Exception and warning types shared by all engines."""


class MmwCoopError(Exception):
    """Base class for toolkit errors."""


class DomainError(MmwCoopError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class NumericalError(MmwCoopError, ArithmeticError):
    """A series, recursion or quadrature failed to converge."""


class InsufficientDeployment(MmwCoopError):
    """A deployment holds fewer base stations than the scheme needs."""


class ConfigError(MmwCoopError, ValueError):
    """A scenario configuration violates one or more invariants.

    ``problems`` lists every violation found, not just the first.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class TruncationWarning(RuntimeWarning):
    """The characteristic function had not decayed at the truncation point."""

    def __init__(self, message, tail_estimate=float("nan")):
        super().__init__(message)
        self.tail_estimate = tail_estimate
