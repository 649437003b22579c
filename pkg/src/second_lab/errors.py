"""Exception types shared across the package.

Invalid arguments raise plain ``ValueError``; everything that can only be
detected while a computation is running gets its own class so callers (and
the CLI exit-code mapping) can tell the failure modes apart.
"""


class IntegrationError(RuntimeError):
    """Adaptive stepping failed (step size underflow / apparent stiffness)."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class NumericalDomainError(RuntimeError):
    """A right-hand side produced non-finite values."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class EmptyEnsembleError(RuntimeError):
    """Every trajectory of a conditioned ensemble was rejected."""

    def __init__(self, message, conditioning=None):
        super().__init__(message)
        self.conditioning = conditioning


class ConfigError(ValueError):
    """A scenario configuration failed schema validation.

    ``field`` names the offending key so CLI error messages can point at it.
    """

    def __init__(self, field, message):
        super().__init__(f"config field '{field}': {message}")
        self.field = field
