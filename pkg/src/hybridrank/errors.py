"""Exception hierarchy shared across the engine.

Validation problems (bad inputs, bad config) and file format problems are
kept distinct so the CLI can map them to different exit codes.
"""


class ValidationError(ValueError):
    """Input data violates a contract (shape, finiteness, duplicate ids, ...)."""


class ConfigError(ValidationError):
    """A configuration value is out of its legal range."""


class DimensionError(ValidationError):
    """Two objects that must share a dimension do not."""


class NotApplicableError(ValidationError):
    """The requested quantity is undefined for the given scheme."""


class FormatError(RuntimeError):
    """A persisted file does not conform to its on-disk format."""


class VersionError(FormatError):
    """File carries an unsupported format version."""


class TruncatedFileError(FormatError):
    """File ends before its declared payload does."""


class ChecksumError(FormatError):
    """Stored checksum does not match the payload."""
