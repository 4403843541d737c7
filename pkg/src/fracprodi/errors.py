"""Exception hierarchy shared by all modules."""


class FracProdiError(Exception):
    """Base class for every error raised by this package."""


# grid
class InvalidBounds(FracProdiError, ValueError):
    pass


class TooFewNodes(FracProdiError, ValueError):
    pass


class GridMismatch(FracProdiError, ValueError):
    pass


# fraclap / spectral / linear
class OutOfRange(FracProdiError, ValueError):
    pass


class EigenvaluePreconditionFailed(FracProdiError):
    """The principal eigenvalue of the linear operator is not positive."""


class SingularSystem(FracProdiError):
    pass


class NoConvergence(FracProdiError):
    pass


class PositivityViolation(FracProdiError):
    pass


class PreconditionNotMet(FracProdiError):
    pass


class OrderingPreconditionFailed(FracProdiError, ValueError):
    pass


class ContainmentPreconditionFailed(FracProdiError, ValueError):
    pass


# stochastic
class InsufficientSurvivors(FracProdiError):
    pass


# semilinear
class EmptyInterval(FracProdiError, ValueError):
    pass


class SubsolutionInequalityViolated(FracProdiError):
    pass


class MonotonicityViolated(FracProdiError):
    pass


class MaxIterExceeded(NoConvergence):
    pass


class GuardExceeded(NoConvergence):
    """Iterates left the a priori bound; treated as evidence of nonexistence."""


class APAssumptionError(FracProdiError):
    pass


# apsweep
class BracketInvalid(FracProdiError, ValueError):
    pass


class PredicateInconsistent(FracProdiError):
    pass


# cli
class ConfigError(FracProdiError):
    pass
