"""Exception types shared across the package."""


class TransIneqError(Exception):
    """Base class for all package errors."""


class AsymmetricDistance(TransIneqError):
    pass


class NegativeDistance(TransIneqError):
    pass


class TriangleViolation(TransIneqError):
    def __init__(self, i, j, k, slack):
        self.triple = (i, j, k)
        self.slack = slack
        super().__init__(
            f"triangle inequality violated at ({i},{j},{k}), slack {slack:.3e}"
        )


class DoublingUnbounded(TransIneqError):
    pass


class DimensionMismatch(TransIneqError):
    pass


class AbsoluteContinuityViolated(TransIneqError):
    pass


class TooLargeForExact(TransIneqError):
    pass


class EntropyInfinite(TransIneqError):
    pass


class BoundVacuous(TransIneqError):
    pass


class ScheduleNotIncreasing(TransIneqError):
    pass


class SolverStall(TransIneqError):
    pass


class DualPrimalGap(TransIneqError):
    def __init__(self, dual, primal):
        self.dual = dual
        self.primal = primal
        super().__init__(
            f"dual/primal values disagree: dual={dual:.10g} primal={primal:.10g}"
        )


class ChainViolated(TransIneqError):
    pass


class InputParse(TransIneqError):
    pass


class UnknownCommand(TransIneqError):
    pass


class BoundaryPointWarning(UserWarning):
    """Variation taken at a measure whose support is strictly inside supp(mu)."""
