"""Exception hierarchy shared by all solver modules."""


class QbdError(Exception):
    """Base class for all errors raised by this package."""


class NonStochastic(QbdError):
    """A matrix expected to be (sub)stochastic has an off row sum or a
    negative entry."""


class SingularStructure(QbdError):
    """A linear system has no unique solution, typically because the
    underlying chain (or matrix pattern) is reducible."""


class NoConvergence(QbdError):
    """An iterative computation exhausted its budget before reaching the
    requested tolerance."""


class NotContractive(QbdError):
    """A matrix that must have spectral radius < 1 does not."""


class DomainError(QbdError):
    """An argument is outside the mathematical domain of the operation."""


class NotPositiveRecurrent(QbdError):
    """The QBD drift condition mu (A_-1 - A_1) 1 > 0 fails, so stationary
    quantities do not exist."""


class NotCentered(QbdError):
    """A reward vector that must satisfy pi g = 0 does not."""


class InvalidPerturbation(QbdError):
    """A perturbation violates Q 1 = 0 or drives P + delta*Q out of [0, 1]."""


class InvalidUniformization(QbdError):
    """The uniformization rate is too small for the given subgenerator."""
