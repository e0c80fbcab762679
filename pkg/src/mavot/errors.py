"""Exception hierarchy shared across the package."""


class MavotError(Exception):
    """Base class for all errors raised by mavot."""


class ConfigError(MavotError, ValueError):
    """Invalid configuration value or dimension mismatch."""


class ContractError(MavotError, ValueError):
    """An input violated an operation's precondition."""


class StateError(MavotError, RuntimeError):
    """An operation was called on an object in the wrong state."""


class InitError(MavotError, ValueError):
    """Tracker initialisation was given an unusable bounding box."""


class WeightFormatError(MavotError):
    """Base class for weight-container problems."""


class BadMagicError(WeightFormatError):
    pass


class TruncatedFileError(WeightFormatError):
    pass


class MissingTensorError(WeightFormatError):
    def __init__(self, name):
        super().__init__(f"missing tensor: {name}")
        self.name = name


class ShapeMismatchError(WeightFormatError):
    def __init__(self, name, expected, got):
        super().__init__(f"tensor {name}: expected shape {tuple(expected)}, got {tuple(got)}")
        self.name = name
        self.expected = tuple(expected)
        self.got = tuple(got)


class SpecError(MavotError, ValueError):
    """Invalid synthetic scene description."""


class SequenceFormatError(MavotError, ValueError):
    """Unreadable frame or malformed ground-truth file."""
