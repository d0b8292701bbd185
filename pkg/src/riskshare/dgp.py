"""Simulated national-accounts panels with known ground truth.

Every unit's output growth is ``d = mu_i + lambda_i * f_t + e_it``. Growth is
split into the five channel left-hand sides as

    L_k = s_k (d - mu) + mu * [k == unsmoothed] + eta_k,   sum_k eta_k = 0,

so with time effects the population channel coefficients are exactly the
planted shares ``s_k``. Log aggregates (GDP, NI, DNI, DNI+G, C+G) are
recovered by reverse cumulative sums of the ``L_k``, cumulated over time and
exponentiated.

Treated units either follow the same law (``weights=None``, exchangeable
design) or are planted convex combinations of donor levels. Treatment,
trends, volatility shifts and measurement error are applied only to treated
units.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .channels import CHANNELS
from .errors import InfeasibleShares
from .panel import PanelDataset, quantize

K = len(CHANNELS)
UNSMOOTHED = CHANNELS.index("unsmoothed")


@dataclass(frozen=True)
class DgpConfig:
    """Simulation settings.

    ``weights``: ``None`` for the exchangeable design, ``"random"`` for
    sparse Dirichlet weights on three donors per treated unit, or an explicit
    weight vector over the first donors (shared by all treated units) or a
    tuple of such vectors, one per treated unit. ``treatment_effect`` and
    ``trend_effect`` are per-channel shifts that must sum to zero;
    ``trend_effect`` is per year of the differenced sample.
    ``post_noise`` perturbs planted-weight treated units after treatment; it
    is ignored in the exchangeable design so treated and donor units keep a
    common law. ``me_gamma_pre`` and ``me_gamma_post`` plant classical measurement error
    on the measured counterfactual's output growth with the given
    attenuation factor.
    """

    n_treated: int = 11
    n_donors: int = 13
    first_year: int = 1990
    last_year: int = 2018
    treatment_year: int = 1999
    weights: object = "random"
    shares: tuple = (0.1, 0.1, 0.2, 0.3, 0.3)
    share_change_post: tuple = (0.0, 0.0, 0.0, 0.0, 0.0)
    treatment_effect: tuple = (0.0, 0.0, 0.0, 0.0, 0.0)
    trend_effect: tuple = (0.0, 0.0, 0.0, 0.0, 0.0)
    post_volatility_multiplier: float = 1.0
    mean_growth: float = 0.025
    growth_dispersion: float = 0.003
    factor_sd: float = 0.015
    loading_sd: float = 0.3
    idio_sd: float = 0.02
    channel_noise_sd: float = 0.004
    level_sd: float = 0.4
    pre_noise: float = 0.0
    post_noise: float = 0.01
    me_gamma_pre: float = 1.0
    me_gamma_post: float = 1.0
    seed: int = 0

    @property
    def years(self) -> tuple:
        return tuple(range(self.first_year, self.last_year + 1))

    @property
    def treated_units(self) -> tuple:
        return tuple(f"T{i + 1:02d}" for i in range(self.n_treated))

    @property
    def donor_units(self) -> tuple:
        return tuple(f"D{i + 1:02d}" for i in range(self.n_donors))

    def validate(self) -> None:
        def vec(name, target):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (K,) or not np.all(np.isfinite(v)):
                raise InfeasibleShares(f"{name} needs {K} finite entries")
            if abs(v.sum() - target) > 1e-12:
                raise InfeasibleShares(f"{name} must sum to {target}, got {v.sum()!r}")

        vec("shares", 1.0)
        for name in ("share_change_post", "treatment_effect", "trend_effect"):
            vec(name, 0.0)
        for name in ("growth_dispersion", "factor_sd", "loading_sd", "idio_sd", "channel_noise_sd",
                     "level_sd", "pre_noise", "post_noise"):
            if getattr(self, name) < 0:
                raise InfeasibleShares(f"{name} must be nonnegative")
        if self.post_volatility_multiplier < 1:
            raise InfeasibleShares("post_volatility_multiplier below 1 would need a negative variance")
        for name in ("me_gamma_pre", "me_gamma_post"):
            g = getattr(self, name)
            if not 0 < g <= 1:
                raise InfeasibleShares(f"{name}={g} needs a negative error variance; use a value in (0, 1]")
        if self.n_treated < 1 or self.n_donors < 2:
            raise InfeasibleShares("need at least one treated unit and two donors")
        if not self.first_year + 2 < self.treatment_year <= self.last_year:
            raise InfeasibleShares("treatment year must leave at least two pre-treatment growth years")


@dataclass(frozen=True, eq=False)
class Truth:
    """Ground truth for one simulated panel."""

    config: DgpConfig
    weights: np.ndarray | None
    counterfactual: PanelDataset
    measured_counterfactual: PanelDataset
    shares_pre: np.ndarray
    shares_post: np.ndarray
    me_sd: tuple = (0.0, 0.0)
    extra: dict = field(default_factory=dict)

    @property
    def effect(self) -> np.ndarray:
        return np.asarray(self.config.treatment_effect, dtype=float)

    def to_json(self) -> dict:
        cfg = asdict(self.config)
        cfg["weights"] = None if isinstance(cfg["weights"], type(None)) else cfg["weights"]
        return {
            "config": json.loads(json.dumps(cfg, default=list)),
            "treated": list(self.config.treated_units),
            "donors": list(self.config.donor_units),
            "weights": None if self.weights is None else
            {u: [repr(float(x)) for x in row] for u, row in zip(self.config.treated_units, self.weights)},
            "shares_pre": dict(zip(CHANNELS, map(float, self.shares_pre))),
            "shares_post": dict(zip(CHANNELS, map(float, self.shares_post))),
            "treatment_effect": dict(zip(CHANNELS, map(float, self.effect))),
            "measurement_error_sd": {"pre": self.me_sd[0], "post": self.me_sd[1]},
        }


def _weights(cfg: DgpConfig, rng: np.random.Generator) -> np.ndarray | None:
    w = cfg.weights
    if w is None:
        return None
    if isinstance(w, str):
        if w != "random":
            raise InfeasibleShares(f"unknown weights spec {w!r}")
        out = np.zeros((cfg.n_treated, cfg.n_donors))
        for i in range(cfg.n_treated):
            pick = rng.choice(cfg.n_donors, size=min(3, cfg.n_donors), replace=False)
            out[i, pick] = rng.dirichlet(np.ones(len(pick)))
        return out
    arr = np.asarray(w, dtype=float)
    if arr.ndim == 1:
        arr = np.tile(arr, (cfg.n_treated, 1))
    if arr.shape[0] != cfg.n_treated or arr.shape[1] > cfg.n_donors:
        raise InfeasibleShares(f"weights shape {arr.shape} incompatible with {cfg.n_treated} treated, "
                               f"{cfg.n_donors} donors")
    arr = np.pad(arr, ((0, 0), (0, cfg.n_donors - arr.shape[1])))
    if np.any(arr < 0) or np.any(np.abs(arr.sum(axis=1) - 1) > 1e-12):
        raise InfeasibleShares("planted weights must lie on the simplex")
    return arr


def _zero_sum_noise(rng, sd, shape) -> np.ndarray:
    xi = rng.normal(0.0, sd, size=shape + (K,))
    return xi - xi.mean(axis=-1, keepdims=True)


def _aggregates_from_channels(L: np.ndarray) -> np.ndarray:
    """Channel increments ``(..., K)`` to log-aggregate increments.

    Aggregates are (GDP, NI, DNI, DNI+G, C+G); each is the sum of its own
    channel and all later ones.
    """
    return np.flip(np.cumsum(np.flip(L, axis=-1), axis=-1), axis=-1)


def _levels(A: np.ndarray) -> dict:
    """Log aggregates ``(units, years, 5)`` to the five national accounts."""
    gdp, ni, dni, h, k = (np.exp(A[..., j]) for j in range(K))
    g = h - dni
    c = k - g
    return {"GDP": gdp, "C": c, "G": g, "NI": ni, "DNI": dni}


def _log_aggregates(levels: dict) -> np.ndarray:
    return np.stack([np.log(levels["GDP"]), np.log(levels["NI"]), np.log(levels["DNI"]),
                     np.log(levels["DNI"] + levels["G"]), np.log(levels["C"] + levels["G"])], axis=-1)


def _initial_log_aggregates(rng, n: int, level_sd: float) -> np.ndarray:
    gdp = np.log(100.0) + rng.normal(0.0, level_sd, n)
    ratios = np.column_stack([
        np.log(0.98) + rng.normal(0, 0.01, n),   # NI / GDP
        np.log(0.99) + rng.normal(0, 0.005, n),  # DNI / NI
        np.log(1.35) + rng.normal(0, 0.02, n),   # (DNI + G) / DNI
        np.log(0.95) + rng.normal(0, 0.01, n),   # (C + G) / (DNI + G)
    ])
    return np.column_stack([gdp, gdp[:, None] + np.cumsum(ratios, axis=1)])


def _check_positive(levels: dict, what: str) -> None:
    for v, arr in levels.items():
        if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
            raise InfeasibleShares(f"{what}: simulated {v} is not positive; reduce noise or share magnitudes")


def _panel(units, years, levels: dict, source: str) -> PanelDataset:
    return PanelDataset(units, years, {v: quantize(levels[v]) for v in ("GDP", "C", "G", "NI", "DNI")}, source)


def simulate_panel(cfg: DgpConfig) -> tuple:
    """Draw one panel ``(actual, truth)``.

    The actual panel lists treated units first, then donors. Values are
    rounded to 12 significant digits (the CSV precision) so written fixtures
    reload bit-identically.
    """
    cfg.validate()
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    years = cfg.years
    T = len(years)
    post = (np.array(years[1:]) >= cfg.treatment_year).astype(float)
    s_t = np.asarray(cfg.shares)[None, :] + post[:, None] * np.asarray(cfg.share_change_post)[None, :]
    n_tr, n_do = cfg.n_treated, cfg.n_donors
    W = _weights(cfg, rng)
    n_base = n_do if W is not None else n_tr + n_do

    # growth processes for every unit built from the common law
    mu_i = cfg.mean_growth + rng.normal(0, cfg.growth_dispersion, n_base)
    lam = 1.0 + rng.normal(0, cfg.loading_sd, n_base)
    f = rng.normal(0, cfg.factor_sd, T - 1)
    d = mu_i[:, None] + lam[:, None] * f[None, :] + rng.normal(0, cfg.idio_sd, (n_base, T - 1))
    L = s_t[None, :, :] * (d - cfg.mean_growth)[:, :, None]
    L[:, :, UNSMOOTHED] += cfg.mean_growth
    L += _zero_sum_noise(rng, cfg.channel_noise_sd, (n_base, T - 1))
    A0 = _initial_log_aggregates(rng, n_base, cfg.level_sd)
    A = np.concatenate([A0[:, None, :], A0[:, None, :] + np.cumsum(_aggregates_from_channels(L), axis=1)], axis=1)
    base = _levels(A)
    _check_positive(base, "base units")

    if W is not None:
        donors = base
        cf = {v: W @ donors[v] for v in donors}
    else:
        cf = {v: base[v][:n_tr] for v in base}
        donors = {v: base[v][n_tr:] for v in base}
    A_cf = _log_aggregates(cf)

    # treated deviations from the counterfactual, in channel increments
    n_pre_lvl = years.index(cfg.treatment_year)
    dev = np.zeros((n_tr, T - 1, K))
    x_cf = np.diff(A_cf[..., 0], axis=1)
    # post-period noise keeps planted-weight units from being exact donor
    # combinations; exchangeable units already carry their own noise
    own_noise = 0.0 if W is None else 1.0
    e = rng.normal(0, cfg.post_noise, (n_tr, T - 1)) * post[None, :] * own_noise
    if cfg.post_volatility_multiplier > 1:
        pre_sd = float(np.std(x_cf[:, post == 0] - x_cf[:, post == 0].mean(axis=0)))
        extra_sd = np.sqrt(cfg.post_volatility_multiplier ** 2 - 1.0) * max(pre_sd, cfg.idio_sd)
        e = e + rng.normal(0, extra_sd, (n_tr, T - 1)) * post[None, :]
    dev += s_t[None, :, :] * e[:, :, None]
    dev += _zero_sum_noise(rng, cfg.channel_noise_sd, (n_tr, T - 1)) * post[None, :, None] * own_noise
    x_act = x_cf + e
    dev += post[None, :, None] * x_act[:, :, None] * np.asarray(cfg.treatment_effect)[None, None, :]
    t_idx = np.arange(T - 1, dtype=float)
    dev += t_idx[None, :, None] * np.asarray(cfg.trend_effect)[None, None, :]

    pre_noise = np.zeros((n_tr, T, K))
    if cfg.pre_noise > 0:
        noise = rng.normal(0, cfg.pre_noise, (n_tr, n_pre_lvl, len(cf)))
        noisy = {v: cf[v][:, :n_pre_lvl] * np.exp(noise[..., j]) for j, v in enumerate(cf)}
        _check_positive(noisy, "noisy pre-treatment levels")
        pre_noise[:, :n_pre_lvl] = _log_aggregates(noisy) - A_cf[:, :n_pre_lvl]
        # the last pre-treatment discrepancy persists so post growth has no jump
        pre_noise[:, n_pre_lvl:] = pre_noise[:, n_pre_lvl - 1:n_pre_lvl]
    A_act = A_cf + pre_noise
    A_act[:, 1:] += np.cumsum(_aggregates_from_channels(dev), axis=1)
    treated = _levels(A_act)
    _check_positive(treated, "treated units")

    # measured counterfactual: additive error on output growth
    x_pre, x_post = x_cf[:, post == 0], x_cf[:, post == 1]

    def within_var(x):
        return float(np.mean((x - x.mean(axis=0)) ** 2)) if x.size else 0.0

    sd_pre = float(np.sqrt(within_var(x_pre) * (1 / cfg.me_gamma_pre - 1)))
    sd_post = float(np.sqrt(within_var(x_post) * (1 / cfg.me_gamma_post - 1)))
    u = rng.normal(0, 1, (n_tr, T - 1)) * np.where(post == 1, sd_post, sd_pre)[None, :]
    measured = dict(cf)
    measured["GDP"] = cf["GDP"] * np.exp(np.concatenate([np.zeros((n_tr, 1)), np.cumsum(u, axis=1)], axis=1))

    units = cfg.treated_units + cfg.donor_units
    actual = _panel(units, years, {v: np.vstack([treated[v], donors[v]]) for v in treated}, "simulated")
    truth = Truth(cfg, W, _panel(cfg.treated_units, years, cf, "counterfactual"),
                  _panel(cfg.treated_units, years, measured, "counterfactual"),
                  np.asarray(cfg.shares, dtype=float), s_t[-1] if post.any() else np.asarray(cfg.shares),
                  (sd_pre, sd_post))
    return actual, truth
