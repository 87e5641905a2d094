"""Exception hierarchy shared by all modules."""


class MinMetricError(Exception):
    """Base class for every error raised by the package."""


# core
class ZeroDirection(MinMetricError):
    pass


class OutsideBox(MinMetricError):
    pass


class PointOutside(MinMetricError):
    pass


class InvalidDomain(MinMetricError):
    pass


# expr
class ExprSyntaxError(MinMetricError):
    """Parse failure; ``offset`` is the byte offset of the offending token."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownVariable(MinMetricError):
    pass


class DomainError(MinMetricError):
    pass


class NonFinite(MinMetricError):
    pass


# hyperbolic models
class OutsideDisc(MinMetricError):
    pass


class AtPuncture(MinMetricError):
    pass


class OutsideBall(MinMetricError):
    pass


# extremal
class Infeasible(MinMetricError):
    pass


class NoConvergence(MinMetricError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


# bounds
class CandidateInvalid(MinMetricError):
    pass


class ConstructionFailed(MinMetricError):
    pass


class RankDeficient(MinMetricError):
    pass


class NotContained(MinMetricError):
    pass


class HypothesisFailed(MinMetricError):
    pass


class NonpositiveFactor(MinMetricError):
    pass


# distance / classify
class ChainFailed(MinMetricError):
    pass


class EmptyDomain(MinMetricError):
    pass
