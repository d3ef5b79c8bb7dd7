"""Exception hierarchy for ucpmaps."""


class UCPError(Exception):
    """Base class for all library errors."""


class NonConvergence(UCPError):
    pass


class BoundaryAmbiguity(UCPError):
    """An eigenvalue sits too close to a spectral selection boundary."""


class SylvesterSingular(UCPError):
    pass


class NotHermitian(UCPError):
    pass


class DimensionMismatch(UCPError):
    pass


class BadWeights(UCPError):
    pass


class BadPartition(UCPError):
    pass


class UnknownFixture(UCPError):
    pass


class BadParams(UCPError):
    pass


class NotUnital(UCPError):
    """Raised when an operation needs a UCP channel but got a non-unital map."""


class NotAnEigenvalue(UCPError):
    pass


class NoSpectralGap(UCPError):
    pass


class NotPeripheral(UCPError):
    pass


class SubsequenceNotFound(UCPError):
    def __init__(self, message, best_k=None, best_value=None):
        super().__init__(message)
        self.best_k = best_k
        self.best_value = best_value


class NotStationary(UCPError):
    pass


class DegenerateDraws(UCPError):
    pass


class InternalInconsistency(UCPError):
    pass


class NotAState(UCPError):
    pass


class NotAProjection(UCPError):
    pass


class ParseError(UCPError):
    def __init__(self, message, line=None, offset=None):
        super().__init__(message)
        self.line = line
        self.offset = offset
