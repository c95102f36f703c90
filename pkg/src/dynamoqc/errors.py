"""Exception hierarchy shared across the package."""


class DynamoQcError(Exception):
    """Base class for all package errors."""


class ValidationError(DynamoQcError):
    """An invariant on a domain object or file was violated."""


class ContainerError(DynamoQcError):
    """A dataset container could not be parsed."""


class DomainError(DynamoQcError):
    """A value lies outside the mathematical domain of an operation."""


class DegenerateInputError(DynamoQcError):
    """Input carries no usable signal (e.g. an all-zero frame)."""


class FitError(DynamoQcError):
    """A model fit could not be performed on the given data."""


class ConfigError(DynamoQcError):
    """The run configuration file is malformed or inconsistent."""


class ConflictError(DynamoQcError):
    """A requested state change conflicts with the current state."""


class NotFoundError(DynamoQcError):
    """A referenced dataset or report does not exist."""
