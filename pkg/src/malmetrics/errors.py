"""Exception types raised across the package."""


class MalmetricsError(Exception):
    """Base class for all package errors."""


class EstimationError(MalmetricsError):
    pass


class ZeroDenominator(EstimationError):
    """An estimator's denominator is zero, so the metric is undefined."""

    def __init__(self, metric, detector=None):
        self.metric = metric
        self.detector = detector
        where = "" if detector is None else f" for detector {detector}"
        super().__init__(f"{metric} is undefined{where}: zero denominator")


class DegenerateDenominator(EstimationError):
    """An asymptotic mean has a zero denominator (all contributing cell means are 0)."""

    def __init__(self, estimator, detector=None):
        self.estimator = estimator
        self.detector = detector
        where = "" if detector is None else f" for detector {detector}"
        super().__init__(f"asymptotics of {estimator} unavailable{where}")


class PreconditionError(MalmetricsError, ValueError):
    pass


class IngestError(MalmetricsError):
    pass


class ParseError(IngestError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class SchemaError(IngestError):
    pass


class TruthMismatch(IngestError):
    pass


class ConfigError(MalmetricsError, ValueError):
    pass
