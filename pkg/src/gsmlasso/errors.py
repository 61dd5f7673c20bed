"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid user-supplied configuration or arguments (CLI exit code 2)."""


class BudgetError(ConfigError):
    """A combinatorial-budget guard was exceeded (oracle-only code paths)."""


class NumericError(RuntimeError):
    """A numerical computation produced non-finite or meaningless results
    (CLI exit code 3)."""
