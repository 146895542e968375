"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised when a simulation configuration is invalid."""


class ContractViolationError(RuntimeError):
    """Raised when an operation is called outside its stated preconditions."""


class FairnessViolationError(ContractViolationError):
    """Raised when a user unexpectedly has no active (BS, sub-channel) entry."""
