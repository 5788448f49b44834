"""Exception hierarchy shared by every module."""


class SspError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SspError, ValueError):
    """Input violates an operation's preconditions (shape, ordering, counts)."""


class NumericInputError(InvalidInputError):
    """Input contains NaN or infinite values."""


class ModelFormatError(SspError):
    """A persisted model file could not be read back."""


class ModelVersionError(ModelFormatError):
    pass


class ModelTruncatedError(ModelFormatError):
    pass


class ModelChecksumError(ModelFormatError):
    pass


class ModelShapeError(ModelFormatError):
    pass
