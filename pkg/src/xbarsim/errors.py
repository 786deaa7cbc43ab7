"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or precondition violation."""


class DomainError(ValueError):
    """Closed-form evaluated outside its domain (e.g. speedup < 3, load >= 1)."""


class InfeasibleDecisionError(ValueError):
    """A schedule would drive some queue count negative (signals a policy bug)."""
