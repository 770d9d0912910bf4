"""Exception types shared across the package."""


class EdaPilotError(Exception):
    """Base class for all package errors."""


class MalformedCsv(EdaPilotError):
    """Ragged row or a cell that cannot be parsed under a hinted type."""


class EmptyFile(EdaPilotError):
    """CSV file has no header row."""


class TableTooLarge(EdaPilotError):
    """Row count exceeds the configured in-memory limit."""


class UnknownColumn(EdaPilotError):
    """A referenced column does not exist in the table."""


class TypeMismatch(EdaPilotError):
    """Operation not defined for the column's type (e.g. Gt on categorical)."""


class SizeExceedsTable(EdaPilotError):
    """Requested sample size is larger than the table."""


class DegenerateCluster(EdaPilotError):
    """More clusters requested than rows available."""


class DuplicateSampleId(EdaPilotError):
    """Two catalog entries resolved to the same sample id."""


class MissingSample(EdaPilotError):
    """A referenced sample id is not present in the catalog."""


class EmptyStack(EdaPilotError):
    """BACK issued at the root frame."""


class EmptyCorpus(EdaPilotError):
    """Topic-model corpus produced no biterms."""


class EmptyGroundSet(EdaPilotError):
    """Reward computation requires at least one reference session."""


class EmptySet(EdaPilotError):
    """Metric requires a non-empty session set."""


class EmptyIntentSlice(EdaPilotError):
    """No sessions with the requested intent label."""


class TooShort(EdaPilotError):
    """Sequence shorter than the operation requires."""


class NonFiniteLoss(EdaPilotError):
    """Training loss became NaN or infinite."""


class ConfigError(EdaPilotError):
    """Invalid run configuration."""
