"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested function."""


class UnsupportedConfigError(ValueError):
    """The configuration is valid but the operation does not cover it."""


class InfeasibleError(ValueError):
    """No agreed receive power satisfies the rate constraint."""
