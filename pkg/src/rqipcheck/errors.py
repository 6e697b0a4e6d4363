"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter lies outside the domain where a quantity is defined."""


class CapacityError(RuntimeError):
    """A requested enumeration or construction exceeds a configured cap."""
