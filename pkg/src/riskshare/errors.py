"""Exception hierarchy shared by every module."""

from __future__ import annotations


class RiskShareError(ValueError):
    """Base class for all estimation and data errors."""


class ConfigError(RiskShareError):
    """Invalid pipeline configuration."""


# panel ---------------------------------------------------------------------


class PanelError(RiskShareError):
    pass


class MissingCell(PanelError):
    def __init__(self, unit, year, variable):
        self.unit, self.year, self.variable = unit, year, variable
        super().__init__(f"missing cell: unit={unit!r} year={year} variable={variable!r}")


class NonNumericValue(PanelError):
    def __init__(self, row, detail=""):
        self.row = row
        msg = f"non-numeric value on row {row}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class DuplicateCell(PanelError):
    def __init__(self, unit, year, variable):
        self.unit, self.year, self.variable = unit, year, variable
        super().__init__(f"duplicate cell: unit={unit!r} year={year} variable={variable!r}")


class NonContiguousYears(PanelError):
    pass


class TooShort(PanelError):
    pass


class RankDeficientTrend(PanelError):
    pass


class NonPositiveValue(PanelError):
    pass


# regress -------------------------------------------------------------------


class RegressionError(RiskShareError):
    pass


class RankDeficient(RegressionError):
    pass


class TooFewClusters(RegressionError):
    pass


class UnbalancedForPcse(RegressionError):
    pass


class UnknownVariable(RegressionError):
    pass


class CollinearAfterDummies(RegressionError):
    pass


# scm -----------------------------------------------------------------------


class ScmError(RiskShareError):
    pass


class DimensionMismatch(ScmError):
    pass


class ZeroV(ScmError):
    pass


class EmptyWindow(ScmError):
    pass


class MisalignedDonors(ScmError):
    pass


class Misaligned(ScmError):
    pass


class ZeroDenominator(RiskShareError):
    pass


# channels ------------------------------------------------------------------


class GridMismatch(RiskShareError):
    pass


class DegenerateSubsample(RiskShareError):
    pass


class TooShortPre(RiskShareError):
    pass


class TooShortCell(RiskShareError):
    pass


# inference / biascorr / dgp ------------------------------------------------


class PoolTooSmall(RiskShareError):
    pass


class ZeroGamma(RiskShareError):
    pass


class InfeasibleShares(RiskShareError):
    pass
