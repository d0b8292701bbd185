"""Measurement-error corrections for the stacked DiD treatment effect.

The synthetic control is an estimated counterfactual, so its slopes are
attenuated: ``beta~ = gamma * beta``. With cell slopes ``TB, TA`` (treated
before/after) and ``CB~, CA~`` (synthetic before/after), the raw effect is
``(TA - CA~) - (TB - CB~)``. Three corrections are offered:

* time-invariant ``gamma = CB~ / TB``, estimated from the treated pre-period;
* placebo-based ``gamma_B`` and ``gamma_A`` from never-treated units, whose
  actual series are their own counterfactual;
* a signed bound ``-CA~ (1/gamma_A - 1)`` when only ``gamma_A <= 1`` is assumed.

``gamma`` summarises ``(var_x + cov) / (var_x + var_err + 2 cov)`` of the
regressor and its error; those moments are never estimated separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .channels import DidTable
from .errors import RiskShareError, ZeroDenominator, ZeroGamma
from .panel import format_value


GAMMA_ROUNDING = 1e-6


class Provenance(str, Enum):
    TREATED_PRE = "treated_pre"
    PLACEBO_PRE = "placebo_pre"
    PLACEBO_FULL = "placebo_full"


@dataclass(frozen=True)
class CellCoefficients:
    """Cell slopes; the ``c*`` entries are measured with error."""

    beta_tb: float
    beta_ta: float
    beta_cb: float
    beta_ca: float
    channel: str = ""

    def __post_init__(self):
        vals = (self.beta_tb, self.beta_ta, self.beta_cb, self.beta_ca)
        if not all(math.isfinite(v) for v in vals):
            raise RiskShareError(f"cell coefficients must be finite: {vals}")

    @classmethod
    def from_did(cls, did: DidTable, channel: str) -> "CellCoefficients":
        cells = did.cell_levels(channel)
        return cls(cells[("actual", "pre")], cells[("actual", "post")],
                   cells[("synthetic", "pre")], cells[("synthetic", "post")], channel)

    @property
    def raw_effect(self) -> float:
        return (self.beta_ta - self.beta_ca) - (self.beta_tb - self.beta_cb)


@dataclass(frozen=True)
class GammaEstimate:
    value: float
    provenance: Provenance
    period: str = "pre"

    def __post_init__(self):
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        if not math.isfinite(self.value):
            raise RiskShareError(f"gamma must be finite, got {self.value}")
        if self.value == 0:
            raise ZeroGamma("gamma is zero")


def gamma_from_pretreatment(c: CellCoefficients) -> GammaEstimate:
    if c.beta_tb == 0:
        raise ZeroDenominator("treated pre-period slope is zero; gamma undefined")
    return GammaEstimate(c.beta_cb / c.beta_tb, Provenance.TREATED_PRE, "pre")


def gammas_from_placebo(placebo: CellCoefficients) -> tuple:
    """``(gamma_B, gamma_A)`` from a placebo unit's own actual/synthetic slopes."""
    if placebo.beta_tb == 0 or placebo.beta_ta == 0:
        raise ZeroDenominator("placebo actual slope is zero; gamma undefined")
    return (GammaEstimate(placebo.beta_cb / placebo.beta_tb, Provenance.PLACEBO_PRE, "pre"),
            GammaEstimate(placebo.beta_ca / placebo.beta_ta, Provenance.PLACEBO_FULL, "post"))


def correct_time_invariant(c: CellCoefficients, beta4_hat: float | None = None) -> float:
    """``beta4_hat - (CA~ - CB~)(TB - CB~) / CB~``."""
    if c.beta_cb == 0:
        raise ZeroDenominator("synthetic pre-period slope is zero")
    b4 = c.raw_effect if beta4_hat is None else beta4_hat
    return b4 - (c.beta_ca - c.beta_cb) * (c.beta_tb - c.beta_cb) / c.beta_cb


def correct_placebo(c: CellCoefficients, gamma_a: GammaEstimate | float, gamma_b: GammaEstimate | float) -> float:
    """``TA - CA~/gamma_A - TB + CB~/gamma_B``."""
    ga = gamma_a.value if isinstance(gamma_a, GammaEstimate) else float(gamma_a)
    gb = gamma_b.value if isinstance(gamma_b, GammaEstimate) else float(gamma_b)
    if ga == 0 or gb == 0:
        raise ZeroGamma("placebo correction needs nonzero gammas")
    # grouped like raw_effect so gamma = 1 returns it bit for bit
    return (c.beta_ta - c.beta_ca / ga) - (c.beta_tb - c.beta_cb / gb)


@dataclass(frozen=True)
class SignBias:
    bias: float
    statement: str
    applicable: bool


def sign_bias(beta_ca: float, gamma_a: float) -> SignBias:
    """Bias of the raw effect, ``-CA~ (1/gamma_A - 1)``, and its sign when ``0 < gamma_A <= 1``."""
    bias = -beta_ca * (1.0 / gamma_a - 1.0) if gamma_a != 0 else math.nan
    if not 0 < gamma_a <= 1:
        return SignBias(bias, "indeterminate", False)
    if gamma_a == 1 or beta_ca == 0:
        return SignBias(bias, "no bias", True)
    direction = "downward" if beta_ca > 0 else "upward"
    return SignBias(bias, f"raw estimate biased {direction} (bias has the sign of -beta_CA)", True)


@dataclass(frozen=True, eq=False)
class CorrectedTable:
    mode: Provenance
    channels: tuple
    raw: Mapping[str, float]
    corrected: Mapping[str, float]
    gammas: Mapping[str, dict] = field(default_factory=dict)

    def implausible(self, channel: str) -> list:
        """Names of the gammas used for ``channel`` outside ``(0, 1]`` (rounding above 1 tolerated)."""
        return sorted(k for k, g in self.gammas[channel].items() if not 0 < g <= 1 + GAMMA_ROUNDING)

    def to_rows(self) -> list:
        rows = [["row", *self.channels],
                ["beta4_raw", *(format_value(self.raw[c]) for c in self.channels)],
                [f"beta4_corrected ({self.mode.value})", *(format_value(self.corrected[c]) for c in self.channels)]]
        for key in self.gammas[self.channels[0]]:
            rows.append([key, *(format_value(self.gammas[c][key]) for c in self.channels)])
        rows.append(["gamma_outside_unit_interval", *(" ".join(self.implausible(c)) or "none"
                                                     for c in self.channels)])
        return rows

    def to_json(self) -> list:
        return [{"channel": c, "beta4_raw": self.raw[c], "beta4_corrected": self.corrected[c],
                 "gamma_used": self.gammas[c], "gamma_outside_unit_interval": self.implausible(c),
                 "mode": self.mode.value} for c in self.channels]


def corrected_table(did: DidTable, mode: Provenance | str, aux: DidTable | None = None) -> CorrectedTable:
    """Per-channel corrected ``beta4``.

    ``treated_pre``: time-invariant correction from the treated pre-period.
    ``placebo_pre``: ``gamma_A = gamma_B`` from the placebo pre-period.
    ``placebo_full``: ``gamma_B`` and ``gamma_A`` from the placebo pre and
    post periods. Placebo modes need ``aux``, a DidTable on never-treated
    units.
    """
    mode = Provenance(mode)
    if mode is not Provenance.TREATED_PRE and aux is None:
        raise RiskShareError(f"mode {mode.value} needs a placebo DidTable")
    raw, corr, gam = {}, {}, {}
    for c in did.channels:
        cells = CellCoefficients.from_did(did, c)
        raw[c] = did.beta(4, c)
        if mode is Provenance.TREATED_PRE:
            g = gamma_from_pretreatment(cells)
            corr[c] = correct_time_invariant(cells, raw[c])
            gam[c] = {"gamma": g.value}
        else:
            gb, ga = gammas_from_placebo(CellCoefficients.from_did(aux, c))
            if mode is Provenance.PLACEBO_PRE:
                ga = gb
            corr[c] = correct_placebo(cells, ga, gb)
            gam[c] = {"gamma_B": gb.value, "gamma_A": ga.value}
    return CorrectedTable(mode, did.channels, raw, corr, gam)
