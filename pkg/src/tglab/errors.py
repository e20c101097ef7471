"""Exception hierarchy shared by all tglab modules."""


class TGLabError(Exception):
    """Base class for every error raised by tglab."""


class InvalidParameter(TGLabError, ValueError):
    pass


class NotPositiveDefinite(TGLabError, ValueError):
    """A matrix that must be SPD failed its Cholesky pivot test."""


class NoConvergence(TGLabError, RuntimeError):
    pass


class IndexOutOfRange(TGLabError, IndexError):
    pass


class BracketingFailure(TGLabError, RuntimeError):
    """No smoother scaling in the search range made the smoothed complement PSD."""


class RankDeficient(TGLabError, ValueError):
    pass


class NotAdmissible(TGLabError, ValueError):
    """A linear coarse solver with B_c + B_c^T - A_c not SPD."""


class IterationBudget(TGLabError, RuntimeError):
    pass


class SingularSketch(TGLabError, RuntimeError):
    pass


class NullConditionViolated(TGLabError, ValueError):
    """Null(tilde A) and Null(RA) intersect nontrivially."""


class NumericalDiagnostic(TGLabError, RuntimeError):
    """Computed zero-eigenvalue multiplicity disagrees with the theory."""


class BoundViolated(TGLabError, AssertionError):
    def __init__(self, message, seed=None, details=None):
        super().__init__(message)
        self.seed = seed
        self.details = details or {}


class Stagnation(TGLabError, RuntimeError):
    pass


class ConfigError(TGLabError, ValueError):
    pass
