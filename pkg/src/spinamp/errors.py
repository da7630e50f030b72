"""Exception types shared across the package."""


class SizingError(ValueError):
    """A requested lattice or experiment exceeds the configured memory budget."""


class CapacityError(RuntimeError):
    """An exhaustive computation was requested beyond its configured limit."""
