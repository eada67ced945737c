"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid scenario configuration or infeasible layout geometry.

    ``field`` names the offending configuration key when known.
    """

    def __init__(self, message: str, field: str = None):
        super().__init__(message)
        self.field = field


class InfeasibleError(ValueError):
    """A UE cannot be given a positive rate under the requested association."""


class EnumerationTooLarge(ValueError):
    """Brute-force enumeration refused because the state space is too big."""
