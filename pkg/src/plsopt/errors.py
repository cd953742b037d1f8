"""Exception types raised by plsopt."""


class PlsOptError(ValueError):
    """Base class for all plsopt errors."""


class NonPositiveDefinite(PlsOptError):
    pass


class DimensionMismatch(PlsOptError):
    pass


class InvalidGroupElement(PlsOptError):
    pass


class DegenerateScore(PlsOptError):
    pass


class RankDeficientKrylov(PlsOptError):
    pass


class SingularGram(PlsOptError):
    pass


class SingularDesign(PlsOptError):
    pass


class UnsupportedPrior(PlsOptError):
    pass


class InsufficientReplicates(PlsOptError):
    pass


class InvalidSpec(PlsOptError):
    pass


class ExperimentPolicyError(PlsOptError):
    """Too many replicates were skipped during a Monte Carlo experiment."""


class UndefinedAtEigenvalue(PlsOptError):
    pass


class NonHermitianInput(PlsOptError):
    pass
