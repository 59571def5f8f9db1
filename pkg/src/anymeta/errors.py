"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage/domain problems exit 1,
ledger integrity problems exit 2, configuration problems exit 3.
"""


class AnymetaError(Exception):
    """Base class for all package errors."""


class DomainError(AnymetaError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ConfigError(AnymetaError, ValueError):
    """An analysis configuration is inconsistent (weights, levels, plans)."""


class LedgerError(AnymetaError, ValueError):
    """A ledger violates its contract (ordering, unknown ids, malformed lines)."""


class LedgerIntegrityError(LedgerError):
    """A ledger line fails its checksum or cannot be parsed."""
