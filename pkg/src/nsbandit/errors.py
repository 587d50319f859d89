"""Exception types shared across the package."""


class NsbanditError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(NsbanditError):
    """A problem configuration or experiment spec is invalid."""


class TooFewArms(ConfigError):
    """Fewer than two arms were requested."""


class BudgetExceedsHorizon(ConfigError):
    """The query budget is larger than the number of rounds."""


class BadConfidence(ConfigError):
    """The confidence level is outside (0, 1)."""


class VariationOutOfRange(ConfigError):
    """The variation budget is negative or outside the admissible range."""


class BudgetExhausted(NsbanditError):
    """A query was recorded with the ledger already at its cap.

    The run loops are designed never to reach this; raising it signals a
    scheduling bug, not a recoverable condition.
    """


class RewardOutOfRange(NsbanditError):
    """A reward outside [0, 1] was fed to a policy update."""


class ZeroProbability(NsbanditError):
    """An importance-weighted update was attempted with probability <= 0."""


class InfeasibleVariation(NsbanditError):
    """The requested mean changes cannot be realised inside [0, 1]."""


class DegenerateInstance(NsbanditError):
    """The hard-instance batch length leaves fewer than two batches."""


class EmptyReplay(NsbanditError):
    """Replay was requested from an instance that recorded no queries.

    Query batches are prefixes of each instance's active rounds, so this
    can only happen through a scheduling bug.
    """


class NonPositiveInput(NsbanditError):
    """Log-log fitting received a non-positive coordinate."""


class MissingColumns(NsbanditError):
    """A CSV file lacks the columns required by a plot kind."""


class DegenerateBatching(UserWarning):
    """The per-batch query length floored to zero and was raised to one."""
