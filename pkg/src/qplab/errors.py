"""Exception types shared across the package."""


class QplabError(Exception):
    """Base class for all numerical and configuration failures."""


class OutOfAnnulus(QplabError, ValueError):
    pass


class RationalInput(QplabError, ValueError):
    pass


class MismatchError(QplabError):
    pass


class SingularError(QplabError):
    pass


class DegenerateError(QplabError):
    pass


class CrossCheckError(QplabError):
    pass


class HypothesisError(QplabError):
    """Raised when an avalanche chain violates a standing hypothesis."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ContourTooClose(QplabError):
    pass


class RootFindingError(QplabError):
    pass


class PreconditionError(QplabError, ValueError):
    pass


class NoSplitError(QplabError):
    pass


class FrequencyError(QplabError, ValueError):
    pass


class ConfigError(QplabError, ValueError):
    pass
