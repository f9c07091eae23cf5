"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input is outside the physical or mathematical domain of an operation."""


class ConfigError(DomainError):
    pass


class FormatError(DomainError):
    """A file does not conform to its documented schema or version."""
