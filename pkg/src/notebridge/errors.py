"""Exception types shared across the package."""


class NotebridgeError(Exception):
    """Base class for all package-specific errors."""


class DatasetError(NotebridgeError):
    """Problem with an input data file."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + loc)


class MissingColumn(DatasetError):
    pass


class DuplicateKey(DatasetError):
    pass


class MalformedRow(DatasetError):
    pass


class NoRatings(NotebridgeError):
    pass


class NonConvergence(NotebridgeError):
    pass


class SingularFit(NotebridgeError):
    pass


class RankDeficientDesign(NotebridgeError):
    pass


class EmptySample(NotebridgeError):
    pass


class DegenerateSample(NotebridgeError):
    pass


class SubsetTooSmall(NotebridgeError):
    pass


class NoPairs(NotebridgeError):
    pass


class AllTies(NotebridgeError):
    pass


class InvalidConfig(NotebridgeError):
    pass
