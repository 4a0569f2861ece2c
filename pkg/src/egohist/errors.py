"""Exception types shared across the package."""


class EgohistError(Exception):
    """Base class for all egohist errors."""


class DatasetFormatError(EgohistError):
    """A mandatory dataset file is missing or the layout is unusable."""


class DatasetParseError(EgohistError):
    """A dataset file contains a malformed entry."""


class DatasetIntegrityError(EgohistError):
    """Dataset files disagree with each other (counts, index ranges)."""


class ShapeError(EgohistError):
    """Array arguments have incompatible shapes."""


class NumericError(EgohistError):
    """A computation received or produced non-finite values."""


class CheckpointError(EgohistError):
    """A checkpoint file is malformed or inconsistent with its config."""


class ConfigError(EgohistError):
    """A configuration value is outside its allowed range."""


class StratificationError(EgohistError):
    """A class has too few members to appear in every fold."""
