"""Exception hierarchy.

Every error carries an optional ``stage`` string (e.g. ``"lra.correction_step"``)
so the CLI can report where a pipeline failed. The three top-level families map
onto CLI exit codes: :class:`ConfigError` -> 2, :class:`NumericalError` -> 3,
:class:`ExternalModelError` -> 4.
"""


class LraSobolError(Exception):
    """Base class for all package errors."""

    def __init__(self, message: str = "", stage: str | None = None):
        super().__init__(message)
        self.stage = stage

    def __str__(self):
        msg = super().__str__()
        if self.stage:
            return f"[{self.stage}] {msg}"
        return msg


class ConfigError(LraSobolError, ValueError):
    pass


class NumericalError(LraSobolError, ArithmeticError):
    pass


class ExternalModelError(LraSobolError, RuntimeError):
    pass


# input model / sampling
class InvalidParameter(ConfigError):
    pass


class OutOfSupport(NumericalError):
    pass


class NonFinite(NumericalError):
    pass


class DimensionTooLarge(ConfigError):
    pass


# polynomials
class DomainError(NumericalError):
    pass


class DegreeExceeded(ConfigError):
    pass


class SizeOverflow(ConfigError):
    pass


# regression
class EmptySet(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass


class UnderDetermined(NumericalError):
    pass


class ZeroVariance(NumericalError):
    pass


class LeverageOne(NumericalError):
    pass


class NumericalBreakdown(NumericalError):
    pass


class FitFailure(NumericalError):
    def __init__(self, message: str = "", stage: str | None = None, fold: int | None = None):
        super().__init__(message, stage)
        self.fold = fold


# meta-models
class NoFeasibleModel(NumericalError):
    pass


class NonDecreasingGuard(NumericalError):
    pass


class CollinearRankOneTerms(NumericalError):
    pass


class AllRanksFailed(NumericalError):
    pass


class NegativeVariance(NumericalError):
    pass


class SubsetTooLarge(ConfigError):
    pass


# sensitivity / benchmarks
class ModelFailure(NumericalError):
    def __init__(self, message: str = "", stage: str | None = None, index: int | None = None):
        super().__init__(message, stage)
        self.index = index


class ZeroRankVariance(NumericalError):
    pass


class SingularStiffness(NumericalError):
    pass


class EigenFailure(NumericalError):
    pass


class UnreadableModel(ConfigError):
    pass
