class ConfigError(ValueError):
    """Invalid parameters or an invariant violated by user input."""


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


class StepSizeError(ValueError):
    """Time step violates a stability or positivity restriction."""
