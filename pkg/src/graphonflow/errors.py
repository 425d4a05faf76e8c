"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A user-supplied parameter or configuration value is invalid."""


class BudgetError(RuntimeError):
    """An exact computation would exceed its declared cost budget."""
