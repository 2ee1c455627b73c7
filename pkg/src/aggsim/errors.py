"""Exception types shared across the package."""


class AggsimError(Exception):
    """Base class for all aggsim errors."""


class InvalidParameterError(AggsimError, ValueError):
    """An argument violates a documented precondition."""


class InvalidPathError(AggsimError, ValueError):
    """A node sequence is not a usable communication path."""


class InvalidStructureError(AggsimError, ValueError):
    """A tree or plan is structurally malformed."""


class ScheduleConflictError(AggsimError):
    """A schedule could not be synthesized without violating the link model."""


class InfeasibleBudgetError(AggsimError):
    """The latency budget is below the minimum the policy can honor."""

    def __init__(self, delta, min_delta):
        self.delta = delta
        self.min_delta = min_delta
        super().__init__(
            f"latency budget {delta} is infeasible; minimum feasible budget is {min_delta}"
        )
