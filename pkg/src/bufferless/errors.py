"""Exception types shared across the package."""


class BufferlessError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(BufferlessError, ValueError):
    """A parameter set violates its documented invariants."""


class DomainError(BufferlessError, ValueError):
    pass


class InsufficientDataError(BufferlessError, ValueError):
    pass


class InvalidPathError(BufferlessError, ValueError):
    pass


class UnreachableError(BufferlessError):
    """Raised when a routing table cannot be built because a pair is disconnected."""

    def __init__(self, source: int, target: int):
        super().__init__(f"node {target} is unreachable from node {source}")
        self.source = source
        self.target = target


class ContractError(BufferlessError):
    pass


class ConfigurationError(BufferlessError, ValueError):
    """Invalid or inconsistent run configuration.

    ``field`` names the offending key when one can be singled out.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class IntegrityError(BufferlessError):
    """A run ledger fails its conservation check."""
