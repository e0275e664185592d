"""Exception hierarchy shared by every module.

All library errors derive from :class:`CCAError` (itself a ``ValueError``), so
callers can catch one type for any constraint violation.  The CLI maps
``CCAError`` to exit code 3.
"""


class CCAError(ValueError):
    """Base class for constraint violations raised by the library."""


class NotFinite(CCAError):
    pass


class NotSymmetric(CCAError):
    pass


class NotPsd(CCAError):
    pass


class NotPd(CCAError):
    pass


class Singular(CCAError):
    pass


class RankDeficient(CCAError):
    pass


class InvalidShape(CCAError):
    pass


class DimensionMismatch(CCAError):
    pass


class InvalidLambdas(CCAError):
    pass


class FrameNotOrthonormal(CCAError):
    pass


class CorrelationOutOfRange(CCAError):
    pass


class TooFewSamples(CCAError):
    pass


class RankTooLarge(CCAError):
    pass


class InvalidParams(CCAError):
    pass


class MatchedProductViolated(CCAError):
    pass


class NonPositiveEntries(CCAError):
    pass


class DegenerateGap(CCAError):
    pass


class InvalidModel(CCAError):
    pass


class InvalidConfig(CCAError):
    pass


class AllReplicatesFailed(CCAError):
    pass


class TooFewPoints(CCAError):
    pass


class NonPositiveLoss(CCAError):
    pass


class MismatchedGrids(CCAError):
    pass
