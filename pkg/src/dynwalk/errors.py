"""Exception types shared across the package."""


class InputError(ValueError):
    """An argument violates an operation's precondition."""


class ScheduleError(ValueError):
    """A schedule violates its structural invariants."""


class ResourceError(RuntimeError):
    """A request exceeds a configured size or budget cap."""


class SolverError(RuntimeError):
    """A linear solve failed to reach the residual tolerance."""


class EstimatorRefused(RuntimeError):
    """An estimator declined to run because its result would be meaningless."""


class PredicateError(RuntimeError):
    """A sweep predicate raised; ``t`` is the time it was evaluated at."""

    def __init__(self, t: float, cause: BaseException):
        super().__init__(f"predicate failed at t={t!r}: {cause!r}")
        self.t = t
        self.cause = cause
