"""Exception types shared across the package."""


class StreamPlanError(Exception):
    """Base class for all streamplan errors."""


class SchemaError(StreamPlanError):
    """A document could not be parsed against its schema."""


class ValidationError(StreamPlanError):
    """Parsed data violates a domain invariant."""


class InfeasibleError(StreamPlanError):
    """No feasible allocation exists for the given inputs.

    ``failures`` carries one entry per unplaceable stream with the reasons
    each execution route was eliminated.
    """

    def __init__(self, message, failures=None):
        super().__init__(message)
        self.failures = list(failures or [])


class ContractError(StreamPlanError):
    """A plan or solution is inconsistent with the inputs it claims to solve."""


class EnumerationLimitError(StreamPlanError):
    """Instance too large for exhaustive enumeration."""


class BudgetExhaustedError(StreamPlanError):
    """Search budget exhausted before the requested guarantee was reached."""
