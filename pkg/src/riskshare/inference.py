"""Permutation (placebo-in-space) inference and placebo studies."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .channels import ChannelSpec, DidTable, did_decomposition, did_ratio, required_variables
from .errors import ConfigError, PoolTooSmall, RiskShareError
from .panel import PanelDataset, format_value
from .regress import VcovSpec
from .scm import ScmConfig, build_counterfactual_panel, fit_unit, synthesize_series

DEGENERATE_BETA2 = 1e-12


def r_statistic(beta2: float, beta4: float) -> float:
    """``|beta4 / beta2|``; a vanishing pre-period gap gives ``inf``."""
    if abs(beta2) < DEGENERATE_BETA2:
        return math.inf
    return abs(beta4 / beta2)


def right_tail_p(r_values: np.ndarray, r_true: float) -> float:
    r_values = np.asarray(r_values, dtype=float)
    if r_values.size == 0:
        raise RiskShareError("no completed permutations")
    return float(np.count_nonzero(r_values >= r_true) / r_values.size)


@dataclass(frozen=True, eq=False)
class PermutationResult:
    r_values: np.ndarray
    r_true: float
    p_value: float
    n_perm: int
    seed: int
    channel: str
    skipped: tuple = ()
    draws: tuple = ()
    beta_true: tuple = (math.nan, math.nan)

    @property
    def n_completed(self) -> int:
        return len(self.r_values)

    @property
    def n_skipped(self) -> int:
        return len(self.skipped)

    def to_rows(self) -> list:
        """One row per permutation: index, drawn units, r, log r, status."""
        rows = [["permutation", "units", "r", "log_r", "status"]]
        skipped = dict(self.skipped)
        it = iter(self.r_values)
        for i in range(self.n_perm):
            units = " ".join(self.draws[i]) if self.draws else ""
            if i in skipped:
                rows.append([str(i), units, "", "", f"skipped: {skipped[i]}"])
                continue
            r = next(it)
            rows.append([str(i), units, _fmt_r(r), _fmt_r(math.log(r)) if r > 0 else "-inf", "ok"])
        return rows

    def to_json(self) -> dict:
        return {"p_value": self.p_value, "r_true": _fmt_r(self.r_true), "n_perm": self.n_perm,
                "n_completed": self.n_completed, "n_skipped": self.n_skipped, "seed": self.seed,
                "channel": self.channel, "beta2_true": repr(self.beta_true[0]),
                "beta4_true": repr(self.beta_true[1])}


def _fmt_r(r: float) -> str:
    return "inf" if math.isinf(r) else format_value(r)


def _pseudo_panels(pool: PanelDataset, draw: Sequence[str], donors: Sequence[str], variables: Sequence[str],
                   cfg: ScmConfig):
    """Actual and synthetic panels for a drawn set; repeated draws become distinct pseudo-units."""
    fits = {}
    di = [pool.unit_index(d) for d in donors]
    names, rows_act, rows_syn = [], {v: [] for v in variables}, {v: [] for v in variables}
    seen: dict = {}
    for u in draw:
        k = seen.get(u, 0)
        seen[u] = k + 1
        names.append(u if k == 0 else f"{u}#{k}")
        ui = pool.unit_index(u)
        for v in variables:
            if (u, v) not in fits:
                fits[(u, v)] = fit_unit(pool, u, v, donors, cfg)
            rows_act[v].append(pool[v][ui])
            rows_syn[v].append(synthesize_series(pool[v][di].T, fits[(u, v)].weights).values)
    act = PanelDataset(names, pool.years, {v: np.vstack(rows_act[v]) for v in variables})
    syn = PanelDataset(names, pool.years, {v: np.vstack(rows_syn[v]) for v in variables}, "synthetic")
    return act, syn


def _draw(seed: int, i: int, units: Sequence[str], n_treated: int) -> tuple:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
    return tuple(units[j] for j in rng.choice(len(units), size=n_treated, replace=True))


@dataclass(frozen=True)
class _Job:
    pool: PanelDataset
    units: tuple
    exclude: tuple
    n_treated: int
    treatment_year: int
    seed: int
    channel: str
    cfg: ScmConfig
    fe_mode: str


_WORKER_JOB: _Job | None = None


def _init_worker(job: _Job) -> None:
    global _WORKER_JOB
    _WORKER_JOB = job


def _one(job: _Job, i: int):
    draw = _draw(job.seed, i, job.units, job.n_treated)
    chosen = set(draw)
    donors = [u for u in job.pool.units if u not in chosen and u not in job.exclude]
    try:
        act, syn = _pseudo_panels(job.pool, draw, donors, required_variables((job.channel,)), job.cfg)
        b2, b4 = did_ratio(act, syn, job.treatment_year, job.channel, job.fe_mode)
        return i, draw, r_statistic(b2, b4), None
    except RiskShareError as exc:
        return i, draw, math.nan, f"{type(exc).__name__}: {exc}"


def _chunk(indices: Sequence[int]):
    return [_one(_WORKER_JOB, i) for i in indices]


def permutation_test(pool: PanelDataset, n_treated: int | None, n_perm: int, treatment_year: int, seed: int,
                     channel: str = "unsmoothed", treated: Sequence[str] | None = None,
                     scm_config: ScmConfig | None = None, exclude: Sequence[str] = (), fe_mode: str = "pooled",
                     jobs: int = 1, r_true: float | None = None) -> PermutationResult:
    """Re-assign treatment to ``n_treated`` pool units (with replacement) ``n_perm`` times.

    Each draw is matched on the variables its channel needs, using every
    pool unit that was not drawn (and not in ``exclude``) as a donor. The
    true statistic comes from ``treated`` (donors: the rest of the pool) or
    is passed directly as ``r_true``. Permutation ``i`` draws from
    ``SeedSequence(seed, spawn_key=(i,))``, so results do not depend on
    ``jobs`` or execution order.
    """
    if n_perm < 1:
        raise ConfigError("n_perm must be at least 1")
    if n_treated is None:
        if treated is None:
            raise ConfigError("give n_treated or the treated units")
        n_treated = len(treated)
    exclude = tuple(exclude)
    units = tuple(u for u in pool.units if u not in exclude)
    if n_treated < 1 or len(units) < n_treated + 2:
        raise PoolTooSmall(f"pool of {len(units)} units cannot supply {n_treated} draws and 2 donors")
    cfg = scm_config or ScmConfig(treatment_year=treatment_year)
    if cfg.treatment_year != treatment_year:
        raise ConfigError("scm_config.treatment_year differs from treatment_year")
    variables = required_variables((channel,))
    cfg = _replace_variables(cfg, variables)

    beta_true = (math.nan, math.nan)
    if r_true is None:
        if treated is None:
            raise ConfigError("give the treated units or r_true")
        donors = [u for u in pool.units if u not in set(treated) and u not in exclude]
        act, syn = _pseudo_panels(pool, tuple(treated), donors, variables, cfg)
        beta_true = did_ratio(act, syn, treatment_year, channel, fe_mode)
        r_true = r_statistic(*beta_true)

    job = _Job(pool, units, exclude, n_treated, treatment_year, int(seed), channel, cfg, fe_mode)
    indices = list(range(n_perm))
    if jobs > 1:
        size = max(1, math.ceil(n_perm / (4 * jobs)))
        chunks = [indices[k:k + size] for k in range(0, n_perm, size)]
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(job,)) as ex:
            results = [r for part in ex.map(_chunk, chunks) for r in part]
    else:
        results = [_one(job, i) for i in indices]
    results.sort(key=lambda t: t[0])
    r_vals = np.array([r for _, _, r, err in results if err is None], dtype=float)
    skipped = tuple((i, err) for i, _, _, err in results if err is not None)
    draws = tuple(d for _, d, _, _ in results)
    p = right_tail_p(r_vals, r_true)
    return PermutationResult(r_vals, float(r_true), p, n_perm, int(seed), channel, skipped, draws,
                             tuple(float(b) for b in beta_true))


def _replace_variables(cfg: ScmConfig, variables) -> ScmConfig:
    return replace(cfg, variables=tuple(variables))


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PlaceboReport:
    did: DidTable
    significant: Mapping[str, bool]
    alpha: float
    pseudo_treated: tuple
    synthetic: PanelDataset | None = field(default=None, repr=False)

    def rejection_rate(self) -> float:
        return float(np.mean(list(self.significant.values())))

    def to_rows(self) -> list:
        rows = self.did.to_rows()
        rows.append([f"significant at {self.alpha:g}", "",
                     *("yes" if self.significant[c] else "no" for c in self.did.channels)])
        return rows

    def to_json(self) -> dict:
        return {"did": self.did.to_json(), "alpha": self.alpha, "pseudo_treated": list(self.pseudo_treated),
                "significant": dict(self.significant)}


def placebo_study(pool: PanelDataset, pseudo_treated: Sequence[str], treatment_year: int,
                  vcov: VcovSpec = VcovSpec(), scm_config: ScmConfig | None = None,
                  spec: ChannelSpec = ChannelSpec(), fe_mode: str = "pooled", alpha: float = 0.05,
                  jobs: int = 1) -> PlaceboReport:
    """Synthetic controls and stacked DiD for never-treated units."""
    missing = [u for u in pseudo_treated if u not in pool.units]
    if missing:
        raise ConfigError(f"pseudo-treated units not in pool: {missing}")
    cfg = scm_config or ScmConfig(treatment_year=treatment_year)
    cfg = _replace_variables(cfg, required_variables(spec.channels))
    synthetic = build_counterfactual_panel(pool, cfg, pseudo_treated, jobs=jobs)
    actual = pool.subset(list(pseudo_treated), variables=list(cfg.variables))
    did = did_decomposition(actual, synthetic, treatment_year, vcov, fe_mode, spec)
    sig = {c: bool(did.pvalues[3, j] < alpha) for j, c in enumerate(did.channels)}
    return PlaceboReport(did, sig, alpha, tuple(pseudo_treated), synthetic)
