"""Exception types shared across the package."""


class BondError(Exception):
    """Base class for all package errors."""


class ConllParseError(BondError):
    """Malformed CoNLL input; carries the offending line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class SchemaError(BondError):
    """A tag or type is not part of the label schema."""


class MissingLayerError(BondError, KeyError):
    """A requested label layer is not attached to the corpus."""


class CheckpointError(BondError):
    """A model checkpoint file is unreadable or incompatible."""


class NumericalError(BondError):
    """A non-finite value appeared where finite math was required."""


class ConfigError(BondError):
    """A pipeline configuration is incomplete or inconsistent."""


class NumericalWarning(UserWarning):
    """Emitted when a probability had to be clamped away from zero."""
