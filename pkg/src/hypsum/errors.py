"""Exception hierarchy. The CLI maps these onto exit codes."""


class HypsumError(Exception):
    """Base class for all library errors."""

    exit_code = 3


class UsageError(HypsumError, ValueError):
    """Invalid argument combination, unknown name, or violated precondition."""

    exit_code = 1


class DomainError(UsageError):
    """Argument outside the mathematical domain (e.g. log log x undefined)."""


class PoleError(DomainError):
    """Evaluation requested at a pole (zeta at s = 1)."""


class ResourceError(HypsumError):
    """Request exceeds a configured cap or memory budget."""

    exit_code = 2


class StateError(HypsumError):
    """Operation needs state that has not been produced yet (e.g. a fit)."""

    exit_code = 1


class ConditioningError(HypsumError):
    """Least-squares basis is numerically degenerate on the requested grid."""

    exit_code = 1


class InconsistencyError(HypsumError):
    """Two independent routes to the same quantity disagree."""

    exit_code = 3
