"""OLS with dummy-variable fixed effects and three covariance estimators.

Every estimation in the package goes through :func:`ols_fit`. Designs are
materialised explicitly by :func:`build_design` (dummies, drop-first) so the
partitioned-regression identities used by the channel module are exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np
from scipy import linalg, stats

from .errors import (
    CollinearAfterDummies,
    RankDeficient,
    RegressionError,
    TooFewClusters,
    UnbalancedForPcse,
    UnknownVariable,
)
from .panel import format_value

RANK_TOL = 1e-10
TAGS = ("unit", "year", "cluster")


class DegeneratePcse(UnbalancedForPcse):
    """Fewer periods than panels: the cross-panel covariance is singular."""


class VcovKind(str, Enum):
    HOMOSKEDASTIC = "homoskedastic"
    CLUSTERED = "clustered"
    PANEL_CORRECTED = "panel_corrected"


@dataclass(frozen=True)
class VcovSpec:
    kind: VcovKind = VcovKind.CLUSTERED
    small_sample: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", VcovKind(self.kind))


@dataclass(frozen=True)
class Observations:
    """Tagged observations: named numeric columns plus unit/year/cluster tags."""

    values: Mapping[str, np.ndarray]
    unit: np.ndarray
    year: np.ndarray
    cluster: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.unit)
        vals = {k: np.asarray(v, dtype=float) for k, v in self.values.items()}
        for k, v in vals.items():
            if v.shape != (n,):
                raise RegressionError(f"column {k!r} has shape {v.shape}, expected ({n},)")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "unit", np.asarray(self.unit))
        object.__setattr__(self, "year", np.asarray(self.year, dtype=int))
        cl = self.unit if self.cluster is None else self.cluster
        object.__setattr__(self, "cluster", np.asarray(cl))

    def __len__(self) -> int:
        return len(self.unit)

    def column(self, name: str) -> np.ndarray:
        if name in self.values:
            return self.values[name]
        if name in TAGS:
            return getattr(self, name)
        raise UnknownVariable(f"unknown variable {name!r}")


@dataclass(frozen=True)
class Terms:
    """Formula description.

    ``interactions`` are tuples of column names multiplied together.
    ``dummies`` expands each named column into level indicators, dropping the
    first (sorted) level. ``group_dummies`` holds ``(group, column)`` pairs:
    indicators for every level of ``column`` within each group, dropping the
    first level per group.
    """

    intercept: bool = True
    slopes: tuple = ()
    interactions: tuple = ()
    dummies: tuple = ()
    group_dummies: tuple = ()


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    X: np.ndarray
    columns: tuple
    unit: np.ndarray
    year: np.ndarray
    cluster: np.ndarray

    @property
    def shape(self):
        return self.X.shape

    def index(self, name: str) -> int:
        return self.columns.index(name)


def _level_label(v) -> str:
    if isinstance(v, (float, np.floating)) and float(v).is_integer():
        v = int(v)
    return str(v)


def build_design(rows: Observations, terms: Terms, check_rank: bool = True) -> DesignMatrix:
    """Materialise ``terms`` over ``rows``.

    Column order: intercept, slopes, interactions, dummy blocks (in
    declaration order).
    """
    n = len(rows)
    cols: list = []
    names: list = []
    if terms.intercept:
        cols.append(np.ones(n))
        names.append("const")
    for s in terms.slopes:
        cols.append(rows.column(s))
        names.append(s)
    for inter in terms.interactions:
        prod = np.ones(n)
        for s in inter:
            prod = prod * rows.column(s)
        cols.append(prod)
        names.append(":".join(inter))
    for d in terms.dummies:
        col = rows.column(d)
        for lev in sorted(set(col.tolist()))[1:]:
            cols.append((col == lev).astype(float))
            names.append(f"{d}[{_level_label(lev)}]")
    for g, d in terms.group_dummies:
        gcol, col = rows.column(g), rows.column(d)
        for glev in sorted(set(gcol.tolist())):
            mask = gcol == glev
            for lev in sorted(set(col[mask].tolist()))[1:]:
                cols.append((mask & (col == lev)).astype(float))
                names.append(f"{g}[{_level_label(glev)}]:{d}[{_level_label(lev)}]")
    X = np.column_stack(cols) if cols else np.empty((n, 0))
    design = DesignMatrix(X, tuple(names), rows.unit, rows.year, rows.cluster)
    if check_rank and X.shape[1]:
        _, r, piv = linalg.qr(X, mode="economic", pivoting=True)
        d = np.abs(np.diag(r))
        if d.min() <= RANK_TOL * d.max():
            bad = [names[piv[i]] for i in range(len(d)) if d[i] <= RANK_TOL * d.max()]
            raise CollinearAfterDummies(f"design is collinear; dependent columns: {bad}")
    return design


@dataclass(frozen=True, eq=False)
class RegressionFit:
    names: tuple
    coef: np.ndarray
    vcov: np.ndarray
    resid: np.ndarray
    df_resid: int
    kind: VcovKind
    nobs: int
    r2: float
    n_clusters: int | None = None
    small_sample: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.vcov), 0.0, None))

    @property
    def tvalues(self) -> np.ndarray:
        se = self.se
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(se > 0, self.coef / np.where(se > 0, se, 1.0), np.nan)

    @property
    def inference_df(self) -> int:
        if self.kind is VcovKind.CLUSTERED and self.n_clusters:
            return self.n_clusters - 1
        return self.df_resid

    @property
    def pvalues(self) -> np.ndarray:
        t = self.tvalues
        p = 2 * stats.t.sf(np.abs(t), self.inference_df)
        return np.where(np.isnan(t), np.nan, p)

    def critical_value(self, level: float = 0.95) -> float:
        return float(stats.t.ppf(0.5 + level / 2, self.inference_df))

    def __getitem__(self, name: str) -> float:
        return float(self.coef[self.names.index(name)])

    def se_of(self, name: str) -> float:
        return float(self.se[self.names.index(name)])

    def pvalue_of(self, name: str) -> float:
        return float(self.pvalues[self.names.index(name)])

    def table(self) -> list:
        return [
            {"name": n, "estimate": format_value(b), "std_error": format_value(s),
             "t_stat": "nan" if np.isnan(t) else format_value(t)}
            for n, b, s, t in zip(self.names, self.coef, self.se, self.tvalues)
        ]

    def to_json(self) -> dict:
        return {"vcov_kind": self.kind.value, "small_sample": self.small_sample,
                "nobs": self.nobs, "r2": format_value(self.r2), "coefficients": self.table()}


def _cluster_codes(labels: np.ndarray):
    _, codes = np.unique(labels, return_inverse=True)
    return codes.ravel(), int(codes.max()) + 1


def _pcse_middle(X: np.ndarray, resid: np.ndarray, unit: np.ndarray, year: np.ndarray) -> np.ndarray:
    units, ucode = np.unique(unit, return_inverse=True)
    years, ycode = np.unique(year, return_inverse=True)
    P, T = len(units), len(years)
    if len(resid) != P * T:
        raise UnbalancedForPcse(f"PCSE needs a balanced grid: {len(resid)} rows for {P} panels x {T} periods")
    cell = ucode * T + ycode
    if len(np.unique(cell)) != P * T:
        raise UnbalancedForPcse("PCSE needs exactly one observation per (panel, period)")
    if T < P:
        raise DegeneratePcse(f"PCSE needs at least as many periods ({T}) as panels ({P})")
    order = np.argsort(cell, kind="stable")
    E = resid[order].reshape(P, T)
    Xp = X[order].reshape(P, T, X.shape[1])
    sigma = E @ E.T / T
    return np.einsum("ij,itk,jtl->kl", sigma, Xp, Xp)


def ols_fit(y: np.ndarray, X: DesignMatrix, vcov: VcovSpec = VcovSpec()) -> RegressionFit:
    """Least squares via QR with the requested covariance estimator.

    Clustered: ``(X'X)^-1 (sum_g X_g'u_g u_g'X_g) (X'X)^-1`` scaled by
    ``G/(G-1) * (N-1)/(N-K)`` when ``small_sample`` is on. Panel-corrected:
    ``(X'X)^-1 X'(S kron I_T)X (X'X)^-1`` with ``S`` the contemporaneous
    cross-panel residual covariance; panels are the ``unit`` tags.
    """
    y = np.asarray(y, dtype=float)
    A = X.X
    n, k = A.shape
    if y.shape != (n,):
        raise RegressionError(f"y has length {len(y)}, design has {n} rows")
    if n <= k:
        raise RankDeficient(f"need more rows ({n}) than columns ({k})")
    q, r = np.linalg.qr(A)
    d = np.abs(np.diag(r))
    if d.min() <= RANK_TOL * d.max():
        raise RankDeficient("design matrix is rank deficient")
    coef = linalg.solve_triangular(r, q.T @ y)
    resid = y - A @ coef
    rinv = linalg.solve_triangular(r, np.eye(k))
    bread = rinv @ rinv.T
    kind = vcov.kind
    n_clusters = None
    if kind is VcovKind.HOMOSKEDASTIC:
        V = bread * (resid @ resid / (n - k))
    elif kind is VcovKind.CLUSTERED:
        codes, G = _cluster_codes(X.cluster)
        if G < 2:
            raise TooFewClusters(f"clustered errors need at least 2 clusters, got {G}")
        scores = np.zeros((G, k))
        np.add.at(scores, codes, A * resid[:, None])
        V = bread @ (scores.T @ scores) @ bread
        if vcov.small_sample:
            V = V * (G / (G - 1)) * ((n - 1) / (n - k))
        n_clusters = G
    else:
        V = bread @ _pcse_middle(A, resid, X.unit, X.year) @ bread
    V = (V + V.T) / 2
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / tss if tss > 0 else 1.0
    return RegressionFit(X.columns, coef, V, resid, n - k, kind, n, r2, n_clusters, vcov.small_sample)


def residualize(M: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Residuals of each column of ``M`` projected on ``Z`` (partialling out)."""
    q, _ = np.linalg.qr(Z)
    return M - q @ (q.T @ M)


def coefficients(y: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Plain least-squares coefficients, no covariance."""
    q, r = np.linalg.qr(X)
    return linalg.solve_triangular(r, q.T @ y)

