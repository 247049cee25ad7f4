"""Exception types raised across the package."""


class ContractError(ValueError):
    """A documented precondition was violated by the caller."""


class UnsupportedRepresentation(ContractError):
    """The operation needs explicit operators but the family only has log-norms."""


class NoRateDerivable(ContractError):
    """``N * a_k >= 1``: a single decay sample does not yield a uniform rate."""


class ResourceLimitError(ContractError):
    """A requested horizon or workload exceeds the configured cap."""


class SpecError(ValueError):
    """A system spec file or explorer config is malformed.

    ``field`` names the offending key (dotted path) when known.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}" if field else message)
        self.message = message
        self.field = field
