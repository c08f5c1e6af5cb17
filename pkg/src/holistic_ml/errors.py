"""Exception types shared across the package."""


class HolisticMLError(Exception):
    """Base class for all package errors."""


class DataError(HolisticMLError, ValueError):
    """Bad input data: missing files, schema mismatches, unparseable cells."""


class ModelError(HolisticMLError, ValueError):
    """A model cannot be trained, scored or explained with the given inputs."""


class ModelFormatError(ModelError):
    """A persisted model document is malformed or has an unsupported version."""


class SingularDesignError(ModelError):
    """The normal equations of a linear fit are singular.

    Raised only when no ridge penalty is applied; retrying with ``l2 > 0``
    always yields a unique solution.
    """
