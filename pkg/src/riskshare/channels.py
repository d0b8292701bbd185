"""Risk-sharing channel regressions.

Output growth is split into five channels whose left-hand sides telescope to
``dlog GDP``::

    capital_markets          dlog GDP - dlog NI
    international_transfers  dlog NI - dlog DNI
    public_savings           dlog DNI - dlog(DNI + G)
    private_savings          dlog(DNI + G) - dlog(C + G)
    unsmoothed               dlog(C + G)

Each is regressed on ``dlog GDP`` with time fixed effects, so the five slope
coefficients always sum to one. The stacked difference-in-differences keeps
that property column by column.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateSubsample,
    GridMismatch,
    NonPositiveValue,
    RiskShareError,
    TooShort,
    TooShortCell,
    TooShortPre,
)
from .panel import PanelDataset, Series, detrend_quadratic, format_value
from .regress import (
    Observations,
    RegressionFit,
    Terms,
    VcovSpec,
    build_design,
    coefficients,
    ols_fit,
    residualize,
)

CHANNELS = ("capital_markets", "international_transfers", "public_savings", "private_savings", "unsmoothed")

# variables each channel's left-hand side needs besides GDP
CHANNEL_INPUTS = {
    "capital_markets": ("GDP", "NI"),
    "international_transfers": ("NI", "DNI"),
    "public_savings": ("DNI", "G"),
    "private_savings": ("DNI", "G", "C"),
    "unsmoothed": ("C", "G"),
}

DID_ROWS = ("Pre/Synthetic", "Pre/Actual", "Post/Synthetic", "Post/Actual")
DID_TERMS = ("x", "Tr:x", "Eur:x", "Tr:Eur:x")
SUM_TOL = 1e-10


def required_variables(channels: Iterable[str]) -> tuple:
    need = ["GDP"]
    for c in channels:
        need.extend(CHANNEL_INPUTS[c])
    return tuple(dict.fromkeys(need))


@dataclass(frozen=True)
class ChannelSpec:
    channels: tuple = CHANNELS

    def __post_init__(self):
        unknown = [c for c in self.channels if c not in CHANNELS]
        if unknown or not self.channels:
            raise RiskShareError(f"unknown channels {unknown}; choose from {CHANNELS}")
        object.__setattr__(self, "channels", tuple(c for c in CHANNELS if c in self.channels))

    @property
    def full(self) -> bool:
        return self.channels == CHANNELS

    @classmethod
    def shortened(cls) -> "ChannelSpec":
        """Unsmoothed equation only."""
        return cls(("unsmoothed",))


@dataclass(frozen=True, eq=False)
class ChannelData:
    """Left-hand sides ``(channel -> (units, years-1))`` and the regressor."""

    lhs: Mapping[str, np.ndarray]
    dlog_gdp: np.ndarray
    units: tuple
    years: tuple


def build_channel_lhs(p: PanelDataset, channels: Sequence[str] = CHANNELS) -> ChannelData:
    if len(p.years) < 2:
        raise TooShort("channel construction needs at least 2 years")
    need = required_variables(channels)
    missing = [v for v in need if v not in p.variables]
    if missing:
        raise RiskShareError(f"panel lacks variables {missing}")
    p.require_positive(need)
    dl = {}

    def dlog(name, arr):
        if name not in dl:
            if np.any(arr <= 0):
                raise NonPositiveValue(f"{name} must be positive")
            dl[name] = np.diff(np.log(arr), axis=1)
        return dl[name]

    lev = lambda v: p[v]  # noqa: E731
    out = {}
    for c in channels:
        if c == "capital_markets":
            out[c] = dlog("GDP", lev("GDP")) - dlog("NI", lev("NI"))
        elif c == "international_transfers":
            out[c] = dlog("NI", lev("NI")) - dlog("DNI", lev("DNI"))
        elif c == "public_savings":
            out[c] = dlog("DNI", lev("DNI")) - dlog("DNI+G", lev("DNI") + lev("G"))
        elif c == "private_savings":
            out[c] = dlog("DNI+G", lev("DNI") + lev("G")) - dlog("C+G", lev("C") + lev("G"))
        else:
            out[c] = dlog("C+G", lev("C") + lev("G"))
    return ChannelData(out, dlog("GDP", lev("GDP")), p.units, p.years[1:])


# ---------------------------------------------------------------------------
# long-format rows


@dataclass(frozen=True, eq=False)
class _Rows:
    obs: Observations
    y: Mapping[str, np.ndarray]


def _rows(parts: Sequence[tuple], treatment_year: int | None, exclude_years=(), years_filter=None) -> _Rows:
    """Flatten ``(ChannelData, tr_flag, cluster_prefix)`` parts into rows."""
    cols = {k: [] for k in ("x", "Tr", "Eur", "year", "unit", "cluster")}
    ys: dict = {}
    excl = set(int(y) for y in exclude_years)
    for data, tr, tag in parts:
        years = np.array(data.years)
        keep = np.array([y not in excl and (years_filter is None or years_filter(y)) for y in years])
        for i, u in enumerate(data.units):
            n = int(keep.sum())
            cols["x"].append(data.dlog_gdp[i, keep])
            cols["Tr"].append(np.full(n, float(tr)))
            if treatment_year is None:
                cols["Eur"].append(np.zeros(n))
            else:
                cols["Eur"].append((years[keep] >= treatment_year).astype(float))
            cols["year"].append(years[keep])
            cols["unit"].append(np.full(n, f"{u}|{tag}", dtype=object))
            cols["cluster"].append(np.full(n, u, dtype=object))
            for c, arr in data.lhs.items():
                ys.setdefault(c, []).append(arr[i, keep])
    cat = {k: np.concatenate(v) for k, v in cols.items()}
    obs = Observations({"x": cat["x"], "Tr": cat["Tr"], "Eur": cat["Eur"]}, cat["unit"], cat["year"], cat["cluster"])
    return _Rows(obs, {c: np.concatenate(v) for c, v in ys.items()})


# ---------------------------------------------------------------------------
# decomposition


@dataclass(frozen=True, eq=False)
class ChannelDecomposition:
    channels: tuple
    estimates: Mapping[str, float]
    std_errors: Mapping[str, float]
    vcov_kind: str
    nobs: int
    r2: Mapping[str, float]
    units: tuple
    years: tuple
    fits: Mapping[str, RegressionFit] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(sum(self.estimates[c] for c in self.channels))

    def as_vector(self) -> np.ndarray:
        return np.array([self.estimates[c] for c in self.channels])

    def to_rows(self) -> list:
        return [["statistic", *self.channels],
                ["estimate", *(format_value(self.estimates[c]) for c in self.channels)],
                ["std_error", *(format_value(self.std_errors[c]) for c in self.channels)],
                ["N", *([str(self.nobs)] * len(self.channels))],
                ["R2", *(format_value(self.r2[c]) for c in self.channels)]]

    def to_json(self) -> dict:
        return {"channels": list(self.channels), "vcov_kind": self.vcov_kind, "nobs": self.nobs,
                "units": list(self.units), "years": [self.years[0], self.years[-1]],
                "estimates": {c: repr(self.estimates[c]) for c in self.channels},
                "std_errors": {c: repr(self.std_errors[c]) for c in self.channels},
                "r2": {c: repr(self.r2[c]) for c in self.channels}}


def _check_identity(values: Sequence[float], target: float, what: str) -> None:
    s = float(np.sum(values))
    if abs(s - target) > SUM_TOL * max(1.0, float(np.abs(values).sum())):
        raise RiskShareError(f"{what} sum to {s!r}, expected {target}")


def channel_decomposition(p: PanelDataset, spec: ChannelSpec = ChannelSpec(), vcov: VcovSpec = VcovSpec(),
                          exclude_years: Iterable[int] = ()) -> ChannelDecomposition:
    """Regress each channel's LHS on ``dlog GDP`` plus year dummies."""
    if len(p.units) < 2:
        raise TooShort("time fixed effects need at least 2 units")
    if len(p.years) < 3:
        raise TooShort("decomposition needs at least 3 years")
    data = build_channel_lhs(p, spec.channels)
    rows = _rows([(data, 0, "actual")], None, exclude_years)
    X = build_design(rows.obs, Terms(slopes=("x",), dummies=("year",)))
    fits = {c: ols_fit(rows.y[c], X, vcov) for c in spec.channels}
    est = {c: fits[c]["x"] for c in spec.channels}
    if spec.full:
        _check_identity(list(est.values()), 1.0, "channel coefficients")
    return ChannelDecomposition(spec.channels, est, {c: fits[c].se_of("x") for c in spec.channels},
                                vcov.kind.value, len(rows.obs), {c: fits[c].r2 for c in spec.channels},
                                p.units, data.years, fits)


def covariance_ratios(p: PanelDataset, channels: Sequence[str] = CHANNELS,
                      exclude_years: Iterable[int] = ()) -> dict:
    """``Cov(dlog GDP, LHS) / Var(dlog GDP)`` after demeaning within each year."""
    data = build_channel_lhs(p, channels)
    keep = np.array([y not in set(exclude_years) for y in data.years])
    x = data.dlog_gdp[:, keep]
    xd = x - x.mean(axis=0, keepdims=True)
    out = {}
    for c in channels:
        y = data.lhs[c][:, keep]
        yd = y - y.mean(axis=0, keepdims=True)
        out[c] = float(np.sum(xd * yd) / np.sum(xd * xd))
    return out


# ---------------------------------------------------------------------------
# stacked difference-in-differences


@dataclass(frozen=True, eq=False)
class DidTable:
    """Stacked DiD coefficients: rows beta1..beta4, one column per channel."""

    channels: tuple
    estimates: np.ndarray
    std_errors: np.ndarray
    pvalues: np.ndarray
    nobs: int
    r2: Mapping[str, float]
    fe_mode: str
    vcov_kind: str
    treatment_year: int
    fits: Mapping[str, RegressionFit] = field(default_factory=dict)

    def beta(self, k: int, channel: str) -> float:
        return float(self.estimates[k - 1, self.channels.index(channel)])

    def column_sums(self) -> np.ndarray:
        return self.estimates.sum(axis=1)

    def cell_levels(self, channel: str) -> dict:
        """Per-cell slopes implied by the interaction coefficients."""
        b1, b2, b3, b4 = (self.beta(k, channel) for k in (1, 2, 3, 4))
        return {("synthetic", "pre"): b1, ("actual", "pre"): b1 + b2,
                ("synthetic", "post"): b1 + b3, ("actual", "post"): b1 + b2 + b3 + b4}

    def to_rows(self) -> list:
        out = [["row", "statistic", *self.channels]]
        for k, label in enumerate(DID_ROWS):
            out.append([label, "estimate", *(format_value(v) for v in self.estimates[k])])
            out.append([label, "std_error", *(format_value(v) for v in self.std_errors[k])])
        out.append(["N", "", *([str(self.nobs)] * len(self.channels))])
        out.append(["R2", "", *(format_value(self.r2[c]) for c in self.channels)])
        return out

    def to_json(self) -> dict:
        return {
            "channels": list(self.channels), "fe_mode": self.fe_mode, "vcov_kind": self.vcov_kind,
            "treatment_year": self.treatment_year, "nobs": self.nobs,
            "rows": {label: {c: {"estimate": repr(float(self.estimates[k, j])),
                                 "std_error": repr(float(self.std_errors[k, j])),
                                 "p_value": repr(float(self.pvalues[k, j]))}
                             for j, c in enumerate(self.channels)}
                     for k, label in enumerate(DID_ROWS)},
            "r2": {c: repr(self.r2[c]) for c in self.channels},
        }


def _check_grids(actual: PanelDataset, synthetic: PanelDataset, treatment_year: int) -> None:
    if actual.years != synthetic.years:
        raise GridMismatch(f"year grids differ: {actual.years[0]}-{actual.years[-1]} vs "
                           f"{synthetic.years[0]}-{synthetic.years[-1]}")
    if actual.units != synthetic.units:
        raise GridMismatch("actual and synthetic panels must list the same units in the same order")
    if not (actual.years[1] < treatment_year <= actual.years[-1]):
        raise RiskShareError(f"treatment year {treatment_year} must fall inside the differenced sample")


def did_terms(fe_mode: str) -> Terms:
    """Design of the stacked regression.

    The regressor vector is ``(1, dlog GDP)``, so the group and post dummies
    enter in levels as well as interacted with the slope. The post level is
    absorbed by the year dummies; under group-specific year effects the
    ``Tr:Eur`` level is absorbed too.
    """
    inter = (("Tr", "x"), ("Eur", "x"), ("Tr", "Eur", "x"))
    if fe_mode == "pooled":
        return Terms(slopes=("x", "Tr"), interactions=inter + (("Tr", "Eur"),), dummies=("year",))
    if fe_mode == "group_specific":
        return Terms(slopes=("x", "Tr"), interactions=inter, group_dummies=(("Tr", "year"),))
    raise RiskShareError(f"unknown fe_mode {fe_mode!r}")


def _did_rows(actual, synthetic, treatment_year, channels, exclude_years, years_filter=None) -> _Rows:
    _check_grids(actual, synthetic, treatment_year)
    da = build_channel_lhs(actual, channels)
    ds = build_channel_lhs(synthetic, channels)
    return _rows([(ds, 0, "synthetic"), (da, 1, "actual")], treatment_year, exclude_years, years_filter)


def _require_cells(rows: _Rows) -> None:
    tr, eur = rows.obs.values["Tr"], rows.obs.values["Eur"]
    for g in (0, 1):
        for e in (0, 1):
            if not np.any((tr == g) & (eur == e)):
                raise DegenerateSubsample(f"empty cell: group={'actual' if g else 'synthetic'} "
                                          f"period={'post' if e else 'pre'}")


def did_decomposition(actual: PanelDataset, synthetic: PanelDataset, treatment_year: int,
                      vcov: VcovSpec = VcovSpec(), fe_mode: str = "pooled",
                      spec: ChannelSpec = ChannelSpec(), exclude_years: Iterable[int] = ()) -> DidTable:
    """Stacked actual/synthetic regression per channel.

    Observations are the ``dlog`` years; a year belongs to the post period
    when it is ``>= treatment_year``.
    """
    rows = _did_rows(actual, synthetic, treatment_year, spec.channels, exclude_years)
    _require_cells(rows)
    X = build_design(rows.obs, did_terms(fe_mode))
    fits = {c: ols_fit(rows.y[c], X, vcov) for c in spec.channels}
    idx = [X.index(t) for t in DID_TERMS]
    est = np.array([[fits[c].coef[i] for c in spec.channels] for i in idx])
    se = np.array([[fits[c].se[i] for c in spec.channels] for i in idx])
    pv = np.array([[fits[c].pvalues[i] for c in spec.channels] for i in idx])
    table = DidTable(spec.channels, est, se, pv, len(rows.obs), {c: fits[c].r2 for c in spec.channels},
                     fe_mode, vcov.kind.value, treatment_year, fits)
    if spec.full:
        for k, target in enumerate((1.0, 0.0, 0.0, 0.0)):
            _check_identity(est[k], target, f"beta{k + 1} across channels")
    return table


def did_ratio(actual: PanelDataset, synthetic: PanelDataset, treatment_year: int,
              channel: str = "unsmoothed", fe_mode: str = "pooled") -> tuple:
    """``(beta2, beta4)`` for one channel, without covariance work."""
    rows = _did_rows(actual, synthetic, treatment_year, (channel,), ())
    X = build_design(rows.obs, did_terms(fe_mode), check_rank=False)
    b = coefficients(rows.y[channel], X.X)
    return float(b[X.index("Tr:x")]), float(b[X.index("Tr:Eur:x")])


def subsample_coefficients(actual: PanelDataset, synthetic: PanelDataset, treatment_year: int,
                           fe_mode: str = "pooled", channels: Sequence[str] = CHANNELS,
                           exclude_years: Iterable[int] = ()) -> dict:
    """Per-cell slopes computed without the stacked interaction design.

    ``group_specific``: a separate regression of each (group, period) cell on
    ``dlog GDP`` and that cell's own year dummies. ``pooled``: the cells share
    the stacked year effects, so the nuisance block (intercept, group levels,
    year dummies) is partialled out first and the residualised LHS is
    regressed on the four cell-specific slope columns.
    """
    rows = _did_rows(actual, synthetic, treatment_year, channels, exclude_years)
    _require_cells(rows)
    o = rows.obs
    tr, eur, x = o.values["Tr"], o.values["Eur"], o.values["x"]
    cells = {("synthetic", "pre"): (tr == 0) & (eur == 0), ("actual", "pre"): (tr == 1) & (eur == 0),
             ("synthetic", "post"): (tr == 0) & (eur == 1), ("actual", "post"): (tr == 1) & (eur == 1)}
    out = {c: {} for c in channels}
    if fe_mode == "group_specific":
        for key, mask in cells.items():
            sub = Observations({"x": x[mask]}, o.unit[mask], o.year[mask], o.cluster[mask])
            X = build_design(sub, Terms(slopes=("x",), dummies=("year",)))
            for c in channels:
                out[c][key] = float(coefficients(rows.y[c][mask], X.X)[1])
        return out
    if fe_mode != "pooled":
        raise RiskShareError(f"unknown fe_mode {fe_mode!r}")
    nuisance = build_design(o, Terms(slopes=("Tr",), interactions=(("Tr", "Eur"),), dummies=("year",))).X
    keys = list(cells)
    S = np.column_stack([x * cells[k] for k in keys])
    S_res = residualize(S, nuisance)
    for c in channels:
        y_res = residualize(rows.y[c][:, None], nuisance)[:, 0]
        b = coefficients(y_res, S_res)
        for k, key in enumerate(keys):
            out[c][key] = float(b[k])
    return out


# ---------------------------------------------------------------------------
# before/after and pre-trend test


@dataclass(frozen=True, eq=False)
class BeforeAfterResult:
    channels: tuple
    gamma1: Mapping[str, float]
    gamma2: Mapping[str, float]
    se1: Mapping[str, float]
    se2: Mapping[str, float]
    nobs: int
    fits: Mapping[str, RegressionFit] = field(default_factory=dict)

    def to_rows(self) -> list:
        return [["row", *self.channels],
                ["Pre", *(format_value(self.gamma1[c]) for c in self.channels)],
                ["Pre (se)", *(format_value(self.se1[c]) for c in self.channels)],
                ["Post change", *(format_value(self.gamma2[c]) for c in self.channels)],
                ["Post change (se)", *(format_value(self.se2[c]) for c in self.channels)],
                ["N", *([str(self.nobs)] * len(self.channels))]]

    def to_json(self) -> dict:
        return {"channels": list(self.channels), "nobs": self.nobs,
                "gamma1": {c: repr(v) for c, v in self.gamma1.items()},
                "gamma2": {c: repr(v) for c, v in self.gamma2.items()},
                "se1": {c: repr(v) for c, v in self.se1.items()},
                "se2": {c: repr(v) for c, v in self.se2.items()}}


def before_after(p: PanelDataset, treatment_year: int, vcov: VcovSpec = VcovSpec(),
                 spec: ChannelSpec = ChannelSpec(), exclude_years: Iterable[int] = ()) -> BeforeAfterResult:
    """One-group regression with a post-period slope shift and year effects."""
    if not (p.years[1] < treatment_year <= p.years[-1]):
        raise RiskShareError(f"treatment year {treatment_year} must fall inside the differenced sample")
    data = build_channel_lhs(p, spec.channels)
    rows = _rows([(data, 1, "actual")], treatment_year, exclude_years)
    eur = rows.obs.values["Eur"]
    if eur.min() == eur.max():
        raise DegenerateSubsample("before/after needs both pre and post observations")
    X = build_design(rows.obs, Terms(slopes=("x",), interactions=(("Eur", "x"),), dummies=("year",)))
    fits = {c: ols_fit(rows.y[c], X, vcov) for c in spec.channels}
    g1 = {c: fits[c]["x"] for c in spec.channels}
    g2 = {c: fits[c]["Eur:x"] for c in spec.channels}
    if spec.full:
        _check_identity(list(g1.values()), 1.0, "gamma1 across channels")
        _check_identity(list(g2.values()), 0.0, "gamma2 across channels")
    return BeforeAfterResult(spec.channels, g1, g2, {c: fits[c].se_of("x") for c in spec.channels},
                             {c: fits[c].se_of("Eur:x") for c in spec.channels}, len(rows.obs), fits)


@dataclass(frozen=True, eq=False)
class TrendTestResult:
    channels: tuple
    beta2: Mapping[str, float]
    beta5: Mapping[str, float]
    se2: Mapping[str, float]
    se5: Mapping[str, float]
    p2: Mapping[str, float]
    p5: Mapping[str, float]
    hierarchical: bool
    fits: Mapping[str, RegressionFit] = field(default_factory=dict)

    def to_rows(self) -> list:
        rows = [["coefficient", "statistic", *self.channels]]
        for name, est, se, pv in (("year x treated", self.beta2, self.se2, self.p2),
                                  ("year x treated x dlogGDP", self.beta5, self.se5, self.p5)):
            rows.append([name, "estimate", *(format_value(est[c]) for c in self.channels)])
            rows.append([name, "std_error", *(format_value(se[c]) for c in self.channels)])
            rows.append([name, "p_value", *(format_value(pv[c]) for c in self.channels)])
        return rows

    def to_json(self) -> dict:
        return {"channels": list(self.channels), "hierarchical": self.hierarchical,
                **{k: {c: repr(v) for c, v in getattr(self, k).items()}
                   for k in ("beta2", "beta5", "se2", "se5", "p2", "p5")}}


def parallel_trend_test(actual: PanelDataset, synthetic: PanelDataset, treatment_year: int,
                        vcov: VcovSpec = VcovSpec(), spec: ChannelSpec = ChannelSpec(),
                        hierarchical: bool = True) -> TrendTestResult:
    """Differential pre-period trends between actual and synthetic series.

    Regressors: intercept, year, year*Tr, dlogGDP, year*dlogGDP,
    year*Tr*dlogGDP on pre-treatment years. With ``hierarchical`` the
    lower-order Tr and Tr*dlogGDP terms are added, which makes the trend
    coefficients independent of the calendar origin (year is then centred
    for conditioning).
    """
    _check_grids(actual, synthetic, treatment_year)
    pre_years = [y for y in actual.years[1:] if y < treatment_year]
    if len(pre_years) < 3:
        raise TooShortPre(f"trend test needs at least 3 pre-treatment years, got {len(pre_years)}")
    rows = _did_rows(actual, synthetic, treatment_year, spec.channels, (), lambda y: y < treatment_year)
    o = rows.obs
    year = o.year.astype(float)
    if hierarchical:
        year = year - pre_years[0]
    obs = Observations({**o.values, "t": year}, o.unit, o.year, o.cluster)
    inter = [("t", "Tr"), ("t", "x"), ("t", "Tr", "x")]
    slopes = ("t", "x")
    if hierarchical:
        inter = [("Tr",), ("Tr", "x")] + inter
    X = build_design(obs, Terms(slopes=slopes, interactions=tuple(inter)))
    fits = {c: ols_fit(rows.y[c], X, vcov) for c in spec.channels}
    b2, b5 = "t:Tr", "t:Tr:x"
    return TrendTestResult(
        spec.channels,
        {c: fits[c][b2] for c in spec.channels}, {c: fits[c][b5] for c in spec.channels},
        {c: fits[c].se_of(b2) for c in spec.channels}, {c: fits[c].se_of(b5) for c in spec.channels},
        {c: fits[c].pvalue_of(b2) for c in spec.channels}, {c: fits[c].pvalue_of(b5) for c in spec.channels},
        hierarchical, fits)


# ---------------------------------------------------------------------------
# growth and volatility


@dataclass(frozen=True, eq=False)
class GrowthVolatilityResult:
    growth: RegressionFit
    variance: RegressionFit
    n_growth: int
    n_variance: int

    def to_rows(self) -> list:
        rows = [["regression", "term", "estimate", "std_error", "p_value", "N"]]
        for label, fit, n in (("growth", self.growth, self.n_growth), ("log_variance", self.variance, self.n_variance)):
            for k, name in enumerate(fit.names):
                rows.append([label, name, format_value(fit.coef[k]), format_value(fit.se[k]),
                             format_value(fit.pvalues[k]) if np.isfinite(fit.pvalues[k]) else "nan", str(n)])
        return rows

    def to_json(self) -> dict:
        return {"growth": {**self.growth.to_json(), "N": self.n_growth},
                "log_variance": {**self.variance.to_json(), "N": self.n_variance}}


def growth_variance_did(actual: PanelDataset, synthetic: PanelDataset, treatment_year: int,
                        vcov: VcovSpec = VcovSpec()) -> GrowthVolatilityResult:
    """Cyclical growth and log-volatility on the four group/period cells.

    Log GDP of every series is detrended with a quadratic trend; growth is
    the first difference of the cyclical component. The volatility
    regression has one log-variance per (unit, group, period).
    """
    _check_grids(actual, synthetic, treatment_year)
    g_cols = {k: [] for k in ("y", "Tr", "Eur", "unit", "year", "cluster")}
    v_cols = {k: [] for k in ("y", "Tr", "Eur", "unit", "year", "cluster")}
    years = np.array(actual.years[1:])
    post = (years >= treatment_year).astype(float)
    for panel, tr, tag in ((synthetic, 0.0, "synthetic"), (actual, 1.0, "actual")):
        panel.require_positive(["GDP"])
        for i, u in enumerate(panel.units):
            cyc = detrend_quadratic(Series(u, "GDP", np.log(panel["GDP"][i]))).values
            growth = np.diff(cyc)
            n = len(growth)
            g_cols["y"].append(growth)
            g_cols["Tr"].append(np.full(n, tr))
            g_cols["Eur"].append(post)
            g_cols["unit"].append(np.full(n, f"{u}|{tag}", dtype=object))
            g_cols["year"].append(years)
            g_cols["cluster"].append(np.full(n, u, dtype=object))
            for e in (0.0, 1.0):
                cell = growth[post == e]
                if len(cell) < 4:
                    raise TooShortCell(f"{u} {tag} {'post' if e else 'pre'} has {len(cell)} growth years, need 4")
                v_cols["y"].append([np.log(np.var(cell, ddof=1))])
                v_cols["Tr"].append([tr])
                v_cols["Eur"].append([e])
                v_cols["unit"].append(np.array([f"{u}|{tag}"], dtype=object))
                v_cols["year"].append([int(e)])
                v_cols["cluster"].append(np.array([u], dtype=object))

    def fit(cols):
        c = {k: np.concatenate([np.asarray(a) for a in v]) for k, v in cols.items()}
        obs = Observations({"Tr": c["Tr"], "Eur": c["Eur"]}, c["unit"], c["year"], c["cluster"])
        X = build_design(obs, Terms(slopes=("Tr", "Eur"), interactions=(("Tr", "Eur"),)))
        return ols_fit(c["y"].astype(float), X, vcov), len(obs)

    g_fit, n_g = fit(g_cols)
    v_fit, n_v = fit(v_cols)
    return GrowthVolatilityResult(g_fit, v_fit, n_g, n_v)


def transcribed_table_check(rows: Mapping[str, Sequence[float]], targets: Mapping[str, float],
                            tol: float = 0.01) -> dict:
    """Check published (rounded) table rows against their accounting targets.

    Returns ``{row: (sum, target, ok)}``.
    """
    out = {}
    for name, vals in rows.items():
        s = float(np.sum(vals))
        out[name] = (s, targets[name], abs(s - targets[name]) <= tol + 1e-12)
    return out
