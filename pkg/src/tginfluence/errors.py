"""Exception types shared across the package."""


class EdgeListParseError(ValueError):
    """A line of an edge-list stream could not be parsed."""


class ValidationError(ValueError):
    """An argument or parsed value violates a documented precondition."""


class NodeLookupError(LookupError):
    """A node id is not part of the node universe."""


class InsufficientSnapshotsError(ValueError):
    """Fewer snapshots are available than an operation requires."""


class ContractError(ValueError):
    """Inputs violate an operation's shape or coverage contract."""


class UndefinedCorrelationError(ValueError):
    """Rank correlation is undefined (all values tied in one vector)."""


class TrainingError(RuntimeError):
    """Training diverged; the message names the failing iteration."""


class ConfigError(ValueError):
    """An experiment configuration is inconsistent or incomplete."""


class StageError(RuntimeError):
    """A pipeline stage failed; the message is tagged with the stage name."""
