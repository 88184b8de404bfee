"""Exception hierarchy.

``StatisticalInputError`` subclasses signal problems with the data or the
statistical configuration (CLI exit code 2); everything else is an internal
failure (exit code 1).
"""


class TranspecError(Exception):
    pass


class StatisticalInputError(TranspecError):
    pass


class DegenerateScale(StatisticalInputError):
    """Lambda_theta(1) - Lambda_theta(0) is not positive."""


class BracketExhausted(TranspecError):
    """Monotone inversion could not bracket the target within the expansion bound."""


class ZeroVariance(StatisticalInputError):
    """All sample values equal; no bandwidth can be formed."""


class DegenerateAnchors(StatisticalInputError):
    """The empirical CDF does not separate the two anchor points."""


class EmptyNeighborhood(StatisticalInputError):
    """No observation within kernel support of the evaluation point."""


class VanishingDenominator(StatisticalInputError):
    """The x1-derivative of the conditional CDF crossed its positivity floor."""


class GridTooCoarse(StatisticalInputError):
    pass


class SingularDesign(StatisticalInputError):
    """Weighted variance of the nonparametric fit is numerically zero."""


class OptimizerStall(TranspecError):
    pass


class InsufficientReplications(StatisticalInputError):
    """Too many bootstrap replications failed to form quantiles."""


class BlockEstimatorFailure(StatisticalInputError):
    """A subsample transformation estimate failed; consider a larger block size."""


class NonMonotoneMixture(StatisticalInputError):
    """The generated transformation is not increasing on the scan window."""


class SingularPhi1(StatisticalInputError):
    pass


class QuadratureFailure(TranspecError):
    def __init__(self, message, summand=None):
        super().__init__(message)
        self.summand = summand


class NonPositiveDefinite(StatisticalInputError):
    pass


class ParseError(StatisticalInputError):
    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class MissingColumn(StatisticalInputError):
    pass
