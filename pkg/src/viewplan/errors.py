"""Exception hierarchy shared across the package."""


class ViewplanError(Exception):
    """Base class for all package errors."""


class InputError(ViewplanError):
    """Unreadable, malformed, or missing input files."""


class ValidationError(ViewplanError):
    """Configuration or parameter values outside their legal range."""


class InfeasiblePlanError(ViewplanError):
    """A flight plan cannot be produced under the given constraints."""


class MemoryBudgetError(ViewplanError):
    """A grid or matrix would exceed the configured memory budget."""

    def __init__(self, message: str, required_bytes: int, budget_bytes: int):
        super().__init__(message)
        self.required_bytes = required_bytes
        self.budget_bytes = budget_bytes
