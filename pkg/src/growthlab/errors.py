"""Exception types shared across modules; the CLI maps them to exit codes."""


class GrowthLabError(Exception):
    exit_code = 1


class PreconditionError(GrowthLabError, ValueError):
    """A mathematical precondition does not hold (exit code 2)."""

    exit_code = 2


class BudgetError(GrowthLabError, RuntimeError):
    """A size or pair budget would be exceeded (exit code 3)."""

    exit_code = 3
