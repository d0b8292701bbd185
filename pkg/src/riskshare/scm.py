"""Synthetic control: simplex-constrained donor weights, predictor weights V,
and construction of synthetic national-account panels.

The inner problem ``min_W (X1 - X0 W)' V (X1 - X0 W)`` over the probability
simplex is solved exactly with an active-set method (a Lawson-Hanson scheme
adapted to the sum-to-one constraint). The outer choice of V minimises the
pre-treatment outcome MSPE.
"""

from __future__ import annotations

import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .errors import (
    ConfigError,
    DimensionMismatch,
    EmptyWindow,
    Misaligned,
    MisalignedDonors,
    ScmError,
    ZeroDenominator,
    ZeroV,
)
from .panel import NATIONAL_ACCOUNTS, PanelDataset, Series

MAX_ITER = 10_000
SIMPLEX_ATOL = 1e-10

V_STRATEGIES = ("nested_mspe", "equal", "user_supplied")
MATCHING_MODES = ("levels", "first_differences_plus_level_means")


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True, eq=False)
class ScmProblem:
    """One treated unit, one outcome variable.

    ``X1`` is the K-vector of treated predictors and ``X0`` the K x N donor
    matrix; ``Z1``/``Z0`` hold the pre-treatment outcome path used to choose
    V. ``groups`` labels each predictor row; V is searched one weight per
    group.
    """

    X1: np.ndarray
    X0: np.ndarray
    Z1: np.ndarray
    Z0: np.ndarray
    donors: tuple
    window: tuple = (None, None)
    groups: tuple | None = None
    treated: str = ""
    variable: str = ""

    def __post_init__(self):
        X1 = np.asarray(self.X1, dtype=float).ravel()
        X0 = np.atleast_2d(np.asarray(self.X0, dtype=float))
        Z1 = np.asarray(self.Z1, dtype=float).ravel()
        Z0 = np.atleast_2d(np.asarray(self.Z0, dtype=float))
        K, N = X0.shape
        if K < 1 or N < 1:
            raise DimensionMismatch("need at least one predictor and one donor")
        if X1.shape != (K,):
            raise DimensionMismatch(f"X1 has {X1.shape[0]} rows, X0 has {K}")
        if len(self.donors) != N:
            raise DimensionMismatch(f"{len(self.donors)} donor ids for {N} donor columns")
        if Z0.shape[0] != len(Z1) or Z0.shape[1] != N:
            raise DimensionMismatch(f"Z0 shape {Z0.shape} does not match Z1 ({len(Z1)}) and {N} donors")
        groups = tuple(range(K)) if self.groups is None else tuple(self.groups)
        if len(groups) != K:
            raise DimensionMismatch(f"{len(groups)} group labels for {K} predictors")
        object.__setattr__(self, "X1", X1)
        object.__setattr__(self, "X0", X0)
        object.__setattr__(self, "Z1", Z1)
        object.__setattr__(self, "Z0", Z0)
        object.__setattr__(self, "donors", tuple(self.donors))
        object.__setattr__(self, "groups", groups)

    @property
    def K(self) -> int:
        return self.X0.shape[0]

    @property
    def N(self) -> int:
        return self.X0.shape[1]


@dataclass(frozen=True, eq=False)
class WeightVector:
    weights: np.ndarray
    donors: tuple
    objective: float = float("nan")
    degenerate: bool = False
    iterations: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if len(w) != len(self.donors):
            raise DimensionMismatch(f"{len(w)} weights for {len(self.donors)} donors")
        if np.any(w < -1e-12) or abs(w.sum() - 1.0) > SIMPLEX_ATOL:
            raise ScmError(f"weights are not on the simplex (min={w.min()}, sum={w.sum()})")
        w = np.clip(w, 0.0, None)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "donors", tuple(self.donors))

    def as_dict(self) -> dict:
        return dict(zip(self.donors, self.weights.tolist()))


@dataclass(frozen=True, eq=False)
class VWeights:
    diagonal: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.diagonal, dtype=float).ravel()
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ScmError("V entries must be finite and nonnegative")
        s = v.sum()
        if s <= 0:
            raise ZeroV("V has no positive entry")
        v = v / s
        v.setflags(write=False)
        object.__setattr__(self, "diagonal", v)

    @classmethod
    def uniform(cls, K: int) -> "VWeights":
        return cls(np.full(K, 1.0 / K))


# ---------------------------------------------------------------------------
# inner solver


def _face_solve(A: np.ndarray, b: np.ndarray, Q: np.ndarray, c: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """argmin ||A u - b|| over the donors ``idx`` subject to sum(u) = 1.

    Solves the KKT system on the Gram matrix; falls back to an orthogonal
    least-squares solve when that system is singular.
    """
    m = len(idx)
    if m == 1:
        return np.ones(1)
    kkt = np.empty((m + 1, m + 1))
    kkt[:m, :m] = Q[idx][:, idx]
    kkt[:m, m] = 1.0
    kkt[m, :m] = 1.0
    kkt[m, m] = 0.0
    rhs = np.empty(m + 1)
    rhs[:m] = c[idx]
    rhs[m] = 1.0
    try:
        sol = np.linalg.solve(kkt, rhs)
        err = np.abs(kkt @ sol - rhs).max()
        if err <= 1e-9 * (np.abs(rhs).max() + 1.0):
            return sol[:m]
    except np.linalg.LinAlgError:
        pass
    Af = A[:, idx]
    a0 = Af[:, 0]
    D = Af[:, 1:] - a0[:, None]
    z = np.linalg.lstsq(D, b - a0, rcond=None)[0]
    return np.concatenate([[1.0 - z.sum()], z])


def simplex_least_squares(A: np.ndarray, b: np.ndarray, max_iter: int = MAX_ITER):
    """Minimise ``||A w - b||^2`` over the probability simplex.

    Returns ``(w, n_iter, degenerate)``. ``degenerate`` is set when the
    Hessian restricted to the optimal face (free donors plus donors with zero
    reduced cost) is singular, i.e. the minimiser may not be unique.
    """
    K, N = A.shape
    if N == 1:
        return np.ones(1), 0, False
    Q = A.T @ A
    c = A.T @ b
    colnorm = np.sqrt(np.diag(Q))
    scale = max(colnorm.max(), np.linalg.norm(b), 1e-300)
    resid0 = A - b[:, None]
    j0 = int(np.argmin(np.einsum("ij,ij->j", resid0, resid0)))
    w = np.zeros(N)
    w[j0] = 1.0
    free = np.zeros(N, dtype=bool)
    free[j0] = True
    eps = 1e-14
    it = 0
    while it < max_iter:
        it += 1
        r = A @ w - b
        g = Q @ w - c
        mu = g[free].mean()
        red = g - mu
        tol = 1e-10 * scale * math.sqrt(r @ r) + 1e-13 * scale * scale
        cand = np.where(~free & (red < -tol))[0]
        if cand.size == 0:
            break
        j = int(cand[np.argmin(red[cand])])
        free[j] = True
        stuck = False
        for _ in range(N + 1):
            idx = np.where(free)[0]
            u = _face_solve(A, b, Q, c, idx)
            if u.min() > eps:
                w[:] = 0.0
                w[idx] = u
                break
            wf = w[idx]
            neg = u <= eps
            step = wf[neg] / (wf[neg] - u[neg])
            alpha = float(np.clip(step.min(), 0.0, 1.0))
            new = wf + alpha * (u - wf)
            drop = idx[new <= eps]
            if alpha == 0.0 and j in drop and wf[idx == j][0] == 0.0:
                stuck = True
            w[idx] = np.where(new <= eps, 0.0, new)
            free[drop] = False
            if stuck or not free.any():
                break
        if not free.any():
            k = int(np.argmax(w))
            free[k] = True
        if stuck:
            free[j] = False
            break
    w = np.clip(w, 0.0, None)
    w /= w.sum()
    r = A @ w - b
    g = A.T @ r
    support = w > 0
    mu = g[support].mean()
    tol = 1e-9 * scale * np.linalg.norm(r) + 1e-12 * scale * scale
    face = support | (g - mu <= tol)
    degenerate = False
    if face.sum() > 1:
        M = np.vstack([A[:, face], np.ones(int(face.sum()))])
        sv = np.linalg.svd(M, compute_uv=False)
        degenerate = bool(len(sv) < face.sum() or sv[-1] <= 1e-10 * sv[0])
    return w, it, degenerate


def scm_objective(p: ScmProblem, v, w: np.ndarray) -> float:
    """V-weighted squared predictor distance, normalised by ``||X1||_V^2``."""
    vd = v.diagonal if isinstance(v, VWeights) else np.asarray(v, dtype=float)
    r = p.X1 - p.X0 @ np.asarray(w, dtype=float)
    den = float(vd @ (p.X1 ** 2))
    val = float(vd @ (r ** 2))
    return val / den if den > 0 else val


def inner_weights(p: ScmProblem, v) -> WeightVector:
    """Donor weights minimising the V-weighted predictor distance.

    ``v`` may be a :class:`VWeights` or any nonnegative K-vector; the argmin
    does not depend on its scale.
    """
    vd = v.diagonal if isinstance(v, VWeights) else np.asarray(v, dtype=float).ravel()
    if vd.shape != (p.K,):
        raise DimensionMismatch(f"V has {vd.size} entries for {p.K} predictors")
    if np.any(vd < 0):
        raise ScmError("V entries must be nonnegative")
    if not np.any(vd > 0):
        raise ZeroV("all V entries are zero")
    sv = np.sqrt(vd)
    A = p.X0 * sv[:, None]
    b = p.X1 * sv
    w, it, degenerate = simplex_least_squares(A, b)
    return WeightVector(w, p.donors, scm_objective(p, vd, w), degenerate, it)


def mspe(p: ScmProblem, w) -> float:
    wv = w.weights if isinstance(w, WeightVector) else np.asarray(w, dtype=float)
    r = p.Z1 - p.Z0 @ wv
    return float(r @ r) / len(r)


# ---------------------------------------------------------------------------
# outer V selection


@dataclass(frozen=True, eq=False)
class VSearch:
    v: VWeights
    weights: WeightVector
    mspe: float
    strategy: str
    lower_bound: float = float("nan")
    evaluations: int = 0


def _group_layout(p: ScmProblem):
    labels = list(dict.fromkeys(p.groups))
    index = np.array([labels.index(g) for g in p.groups])
    counts = np.bincount(index, minlength=len(labels)).astype(float)
    return labels, index, counts


def _expand(g: np.ndarray, index: np.ndarray, counts: np.ndarray) -> np.ndarray:
    return g[index] / counts[index]


def optimize_v(p: ScmProblem, strategy: str = "nested_mspe", user_v=None, grid_step: float = 1e-3,
               n_starts: int = 20, max_evals_per_start: int = 400) -> VSearch:
    """Choose V and return it with the donor weights it induces.

    ``nested_mspe`` minimises the pre-treatment outcome MSPE of
    ``W*(V)``. Because ``min_W MSPE(W)`` is itself a simplex least-squares
    problem, it gives an exact lower bound: the search stops as soon as a V
    attains it (for example uniform V when the predictors are the outcome
    path). With one weight group per predictor variable: G = 2 uses a grid of
    step ``grid_step`` plus a bounded scalar polish, G = 3 a grid of step
    ``10 * grid_step`` plus Nelder-Mead polish, larger G Nelder-Mead from
    ``n_starts`` Halton starts.
    """
    if strategy not in V_STRATEGIES:
        raise ConfigError(f"unknown V strategy {strategy!r}; choose from {V_STRATEGIES}")
    if p.Z0.shape[0] == 0:
        raise EmptyWindow("pre-treatment outcome window is empty")
    if strategy == "equal":
        v = VWeights.uniform(p.K)
        w = inner_weights(p, v)
        return VSearch(v, w, mspe(p, w), strategy, evaluations=1)
    if strategy == "user_supplied":
        if user_v is None:
            raise ConfigError("v_strategy=user_supplied requires user_v")
        v = VWeights(user_v)
        if v.diagonal.shape != (p.K,):
            raise DimensionMismatch(f"user V has {v.diagonal.size} entries for {p.K} predictors")
        w = inner_weights(p, v)
        return VSearch(v, w, mspe(p, w), strategy, evaluations=1)

    labels, index, counts = _group_layout(p)
    G = len(labels)
    if G == 1:
        # a single weight group leaves nothing to search over
        v = VWeights.uniform(p.K)
        w = inner_weights(p, v)
        return VSearch(v, w, mspe(p, w), strategy, evaluations=1)
    wz, _, _ = simplex_least_squares(p.Z0, p.Z1)
    lower = mspe(p, wz)
    atol = 1e-12 * max(float(p.Z1 @ p.Z1) / len(p.Z1), 1e-300)
    cache: dict = {}
    best = {"f": math.inf, "g": None, "w": None}

    class _Done(Exception):
        pass

    def evaluate(g: np.ndarray) -> float:
        g = np.clip(np.asarray(g, dtype=float), 0.0, None)
        s = g.sum()
        if s <= 0:
            return math.inf
        g = g / s
        key = tuple(np.round(g, 15))
        if key in cache:
            return cache[key]
        wv = inner_weights(p, _expand(g, index, counts))
        f = mspe(p, wv)
        cache[key] = f
        if f < best["f"]:
            best.update(f=f, g=g, w=wv)
        return f

    def finish():
        v = VWeights(_expand(best["g"], index, counts))
        return VSearch(v, best["w"], best["f"], strategy, lower, len(cache))

    def check_bound():
        if best["f"] <= lower + atol:
            raise _Done

    try:
        evaluate(np.full(G, 1.0 / G))
        check_bound()
        if G == 2:
            n = int(round(1.0 / grid_step))
            for a in np.linspace(0.0, 1.0, n + 1):
                evaluate(np.array([a, 1.0 - a]))
            check_bound()
            a0 = best["g"][0]
            lo, hi = max(0.0, a0 - grid_step), min(1.0, a0 + grid_step)
            if hi > lo:
                optimize.minimize_scalar(lambda a: evaluate(np.array([a, 1.0 - a])), bounds=(lo, hi),
                                         method="bounded", options={"xatol": 1e-9})
            raise _Done
        if G == 3:
            step = 10 * grid_step
            n = int(round(1.0 / step))
            for i in range(n + 1):
                for j in range(n + 1 - i):
                    evaluate(np.array([i, j, n - i - j], dtype=float))
            check_bound()
            starts = [best["g"]]
        else:
            pts = qmc.Halton(d=G, scramble=False).random(n_starts + 1)[1:]
            starts = [pt / pt.sum() for pt in pts]

        def objective(z):
            f = evaluate(z * z)
            check_bound()
            return f

        for g0 in starts:
            optimize.minimize(objective, np.sqrt(g0), method="Nelder-Mead",
                              options={"maxfev": max_evals_per_start, "xatol": 1e-8, "fatol": 1e-14})
    except _Done:
        pass
    return finish()


# ---------------------------------------------------------------------------
# series synthesis and weight utilities


def synthesize_series(Y0: np.ndarray, w: WeightVector, unit: str = "", variable: str = "") -> Series:
    """Counterfactual path ``Y0 @ w``; ``Y0`` is years x donors."""
    Y0 = np.atleast_2d(np.asarray(Y0, dtype=float))
    if Y0.shape[1] != len(w.weights):
        raise DimensionMismatch(f"Y0 has {Y0.shape[1]} donor columns, weight vector has {len(w.weights)}")
    return Series(unit, variable, Y0 @ w.weights)


def combine_fixed_weights(ws: Sequence[WeightVector]) -> WeightVector:
    """Equal-weight average of per-variable donor weights."""
    if not ws:
        raise ScmError("no weight vectors to combine")
    donors = ws[0].donors
    for w in ws[1:]:
        if w.donors != donors:
            raise MisalignedDonors("weight vectors refer to different donor pools")
    mean = np.mean([w.weights for w in ws], axis=0)
    return WeightVector(mean / mean.sum(), donors)


def identity_diagnostic(direct_gdp, implied_gdp) -> tuple:
    """Mean and standard deviation of ``100 * (implied - direct) / direct``.

    Accepts arrays of any matching shape; all cells are pooled.
    """
    d = np.asarray(getattr(direct_gdp, "values", direct_gdp), dtype=float).ravel()
    m = np.asarray(getattr(implied_gdp, "values", implied_gdp), dtype=float).ravel()
    if d.shape != m.shape:
        raise Misaligned(f"series lengths differ: {d.size} vs {m.size}")
    if np.any(d == 0):
        raise ZeroDenominator("direct GDP contains zeros")
    pct = 100.0 * (m - d) / d
    sd = float(np.std(pct, ddof=1)) if pct.size > 1 else 0.0
    return float(np.mean(pct)), sd


_TERM = re.compile(r"\s*([+-])?\s*(?:(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)\s*\*\s*)?([A-Za-z_][A-Za-z0-9_]*)\s*")


def parse_recombination(rule: str) -> list:
    """Parse ``"C + G + 0.5*X - M"`` into ``[(coef, variable), ...]``."""
    pos, terms = 0, []
    rule = rule.strip()
    if not rule:
        raise ConfigError("empty recombination rule")
    while pos < len(rule):
        m = _TERM.match(rule, pos)
        if not m or m.end() == pos or (terms and m.group(1) is None):
            raise ConfigError(f"cannot parse recombination rule {rule!r} at position {pos}")
        sign = -1.0 if m.group(1) == "-" else 1.0
        coef = float(m.group(2)) if m.group(2) else 1.0
        terms.append((sign * coef, m.group(3)))
        pos = m.end()
    return terms


def recombine(panel: PanelDataset, rule: str | Callable[[PanelDataset], np.ndarray]) -> np.ndarray:
    if callable(rule):
        return np.asarray(rule(panel), dtype=float)
    out = np.zeros((len(panel.units), len(panel.years)))
    for c, v in parse_recombination(rule):
        out = out + c * panel[v]
    return out


# ---------------------------------------------------------------------------
# panel-level matching


@dataclass(frozen=True)
class ScmConfig:
    """Matching settings.

    ``predictors`` names panel variables; ``"target"`` stands for the
    variable being synthesised. ``window`` defaults to the first panel year
    through ``treatment_year - 1``.
    """

    treatment_year: int = 1999
    variables: tuple = NATIONAL_ACCOUNTS
    predictors: tuple = ("target",)
    window: tuple | None = None
    v_strategy: str = "nested_mspe"
    user_v: tuple | None = None
    matching_mode: str = "levels"
    aggregation: str = "stacked"
    standardize: bool = True
    donors: tuple | None = None
    exclude_donors: tuple = ()
    fixed_weights: bool = False
    grid_step: float = 1e-3
    n_starts: int = 20

    def __post_init__(self):
        if self.v_strategy not in V_STRATEGIES:
            raise ConfigError(f"unknown v_strategy {self.v_strategy!r}")
        if self.matching_mode not in MATCHING_MODES:
            raise ConfigError(f"unknown matching_mode {self.matching_mode!r}")
        if self.aggregation not in ("stacked", "means"):
            raise ConfigError(f"unknown aggregation {self.aggregation!r}")
        if self.window is not None and int(self.window[1]) >= int(self.treatment_year):
            raise ConfigError(f"matching window {self.window} must end before treatment year {self.treatment_year}")

    def window_years(self, panel: PanelDataset) -> list:
        start, end = self.window if self.window is not None else (panel.years[0], self.treatment_year - 1)
        yrs = [y for y in panel.years if int(start) <= y <= int(end)]
        if not yrs:
            raise EmptyWindow(f"matching window {start}-{end} has no panel years")
        return yrs

    def donor_pool(self, panel: PanelDataset, treated: Sequence[str]) -> list:
        base = list(self.donors) if self.donors is not None else [u for u in panel.units if u not in treated]
        overlap = set(base) & set(treated)
        if overlap:
            raise ConfigError(f"units cannot be their own donors: {sorted(overlap)}")
        pool = [u for u in base if u not in set(self.exclude_donors)]
        if not pool:
            raise ScmError("donor pool is empty")
        return pool


def build_problem(panel: PanelDataset, unit: str, variable: str, donors: Sequence[str],
                  cfg: ScmConfig) -> ScmProblem:
    """Assemble predictors and pre-treatment outcome path for one fit."""
    years = cfg.window_years(panel)
    ti = [panel.year_index(y) for y in years]
    ui = panel.unit_index(unit)
    di = [panel.unit_index(d) for d in donors]
    names = [variable if p == "target" else p for p in cfg.predictors]
    names = list(dict.fromkeys(names))
    rows1, rows0, groups = [], [], []

    def add(block1, block0, label):
        # block1: (r,), block0: (r, N); scaled jointly per group
        if cfg.standardize:
            sd = float(np.std(np.concatenate([block1.ravel(), block0.ravel()])))
            if sd > 0:
                block1, block0 = block1 / sd, block0 / sd
        rows1.append(block1)
        rows0.append(block0)
        groups.extend([label] * len(block1))

    for name in names:
        M = panel[name][:, ti]
        x1, x0 = M[ui], M[di].T
        if cfg.matching_mode == "levels":
            if cfg.aggregation == "means":
                add(x1.mean(keepdims=True), x0.mean(axis=0, keepdims=True), name)
            else:
                add(x1, x0, name)
        else:
            if len(years) < 2:
                raise EmptyWindow("first-difference matching needs at least 2 window years")
            add(np.diff(x1), np.diff(x0, axis=0), f"d.{name}")
            add(x1.mean(keepdims=True), x0.mean(axis=0, keepdims=True), f"mean.{name}")
    Y = panel[variable][:, ti]
    return ScmProblem(np.concatenate(rows1), np.vstack(rows0), Y[ui], Y[di].T, tuple(donors),
                      (years[0], years[-1]), tuple(groups), unit, variable)


@dataclass(frozen=True, eq=False)
class ScmFit:
    unit: str
    variable: str
    weights: WeightVector
    v: VWeights
    mspe: float
    strategy: str


def fit_unit(panel: PanelDataset, unit: str, variable: str, donors: Sequence[str], cfg: ScmConfig) -> ScmFit:
    p = build_problem(panel, unit, variable, donors, cfg)
    res = optimize_v(p, cfg.v_strategy, cfg.user_v, cfg.grid_step, cfg.n_starts)
    return ScmFit(unit, variable, res.weights, res.v, res.mspe, res.strategy)


def _fit_task(args):
    return fit_unit(*args)


def build_counterfactual_panel(actual: PanelDataset, cfg: ScmConfig, treated: Sequence[str],
                               jobs: int = 1) -> PanelDataset:
    """Synthesise every ``cfg.variables`` series for each treated unit.

    Each (unit, variable) pair gets its own donor weights unless
    ``cfg.fixed_weights`` is set, in which case the per-variable weights of a
    unit are averaged and applied to all its variables. Weights, V and MSPE
    are attached in ``metadata``.
    """
    treated = list(treated)
    for u in treated:
        actual.unit_index(u)
    missing = [v for v in cfg.variables if v not in actual.variables]
    if missing:
        raise ScmError(f"variables missing from panel: {missing}")
    donors = cfg.donor_pool(actual, treated)
    tasks = [(actual, u, v, donors, cfg) for u in treated for v in cfg.variables]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            fits = list(ex.map(_fit_task, tasks))
    else:
        fits = [_fit_task(t) for t in tasks]
    by_key = {(f.unit, f.variable): f for f in fits}
    di = [actual.unit_index(d) for d in donors]
    weights = {v: {} for v in cfg.variables}
    for u in treated:
        if cfg.fixed_weights:
            wt = combine_fixed_weights([by_key[(u, v)].weights for v in cfg.variables])
            for v in cfg.variables:
                weights[v][u] = wt
        else:
            for v in cfg.variables:
                weights[v][u] = by_key[(u, v)].weights
    data = {}
    for v in cfg.variables:
        Y0 = actual[v][di].T
        data[v] = np.vstack([synthesize_series(Y0, weights[v][u]).values for u in treated])
    meta = {
        "weights": weights,
        "fits": by_key,
        "donors": tuple(donors),
        "v_strategy": cfg.v_strategy,
        "fixed_weights": cfg.fixed_weights,
    }
    return PanelDataset(treated, actual.years, data, "synthetic", meta)


def weights_table(synthetic: PanelDataset, variable: str) -> list:
    """Donor x treated grid of weights in percent (one decimal)."""
    weights = synthetic.metadata["weights"][variable]
    donors = synthetic.metadata["donors"]
    units = list(weights)
    rows = [["donor", *units]]
    for k, d in enumerate(donors):
        rows.append([d, *(f"{100 * weights[u].weights[k]:.1f}" for u in units)])
    return rows


def weights_json(synthetic: PanelDataset) -> dict:
    meta = synthetic.metadata
    out = {"v_strategy": meta["v_strategy"], "fixed_weights": meta["fixed_weights"],
           "donors": list(meta["donors"]), "variables": {}}
    for v, per_unit in meta["weights"].items():
        out["variables"][v] = {}
        for u, w in per_unit.items():
            fit = meta["fits"].get((u, v))
            out["variables"][v][u] = {
                "weights": [repr(float(x)) for x in w.weights],
                "mspe": repr(float(fit.mspe)) if fit else None,
                "v": [repr(float(x)) for x in fit.v.diagonal] if fit else None,
                "degenerate": bool(fit.weights.degenerate) if fit else False,
            }
    return out
