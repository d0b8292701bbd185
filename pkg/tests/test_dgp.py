import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskshare.channels import CHANNELS, build_channel_lhs, channel_decomposition
from riskshare.dgp import DgpConfig, simulate_panel
from riskshare.errors import InfeasibleShares


def test_same_seed_bit_identical():
    a1, t1 = simulate_panel(DgpConfig(seed=42, pre_noise=0.01))
    a2, t2 = simulate_panel(DgpConfig(seed=42, pre_noise=0.01))
    assert a1.equals(a2) and t1.counterfactual.equals(t2.counterfactual)
    assert json.dumps(t1.to_json(), sort_keys=True) == json.dumps(t2.to_json(), sort_keys=True)
    a3, _ = simulate_panel(DgpConfig(seed=43, pre_noise=0.01))
    assert not a1.equals(a3)


def test_layout():
    cfg = DgpConfig(n_treated=3, n_donors=4)
    actual, truth = simulate_panel(cfg)
    assert actual.units == ("T01", "T02", "T03", "D01", "D02", "D03", "D04")
    assert actual.years == tuple(range(1990, 2019))
    assert truth.counterfactual.units == cfg.treated_units
    assert set(actual.variables) == {"GDP", "C", "G", "NI", "DNI"}


def test_zero_noise_planted_weights_exact():
    cfg = DgpConfig(n_treated=1, n_donors=5, weights=(0.2, 0.3, 0.5), pre_noise=0.0)
    actual, truth = simulate_panel(cfg)
    pre = [actual.year_index(y) for y in range(1990, 1999)]
    d = [actual.unit_index(u) for u in ("D01", "D02", "D03")]
    for v in actual.variables:
        combo = np.array([0.2, 0.3, 0.5]) @ actual[v][d][:, pre]
        assert np.allclose(actual[v][0, pre], combo, rtol=1e-10)
    assert np.allclose(truth.weights[0], [0.2, 0.3, 0.5, 0, 0])


def test_all_unsmoothed_share_moves_one_for_one():
    cfg = DgpConfig(weights=None, shares=(0, 0, 0, 0, 1), channel_noise_sd=0.0, first_year=1900,
                    treatment_year=2018)
    actual, _ = simulate_panel(cfg)
    d = build_channel_lhs(actual)
    assert np.allclose(d.lhs["unsmoothed"], d.dlog_gdp, atol=1e-10)
    dec = channel_decomposition(actual)
    assert abs(dec.estimates["unsmoothed"] - 1) < 1e-8


@settings(max_examples=15)
@given(st.integers(0, 2 ** 32 - 1),
       st.lists(st.floats(0.02, 1.0), min_size=5, max_size=5))
def test_panels_always_valid(seed, raw):
    shares = tuple(np.array(raw) / sum(raw))
    shares = shares[:4] + (1 - sum(shares[:4]),)
    try:
        actual, truth = simulate_panel(DgpConfig(seed=seed, shares=shares, pre_noise=0.005))
    except InfeasibleShares:
        return
    for v in actual.variables:
        assert np.all(actual[v] > 0) and np.all(np.isfinite(actual[v]))
    assert np.all(truth.counterfactual["GDP"] > 0)


def test_monte_carlo_shares_within_002():
    est = []
    for seed in range(100):
        actual, _ = simulate_panel(DgpConfig(seed=seed, weights=None))
        est.append(channel_decomposition(actual).as_vector())
    mean = np.mean(est, axis=0)
    assert np.max(np.abs(mean - [0.1, 0.1, 0.2, 0.3, 0.3])) < 0.02


def test_exchangeable_null_design():
    """Treated and donor units share one law when there is no treatment."""
    cfg = DgpConfig(weights=None, post_noise=0.0, seed=0)
    mean_t, mean_d = [], []
    for seed in range(30):
        actual, truth = simulate_panel(DgpConfig(weights=None, post_noise=0.0, seed=seed))
        d = build_channel_lhs(actual).dlog_gdp
        mean_t.append(d[:cfg.n_treated].std())
        mean_d.append(d[cfg.n_treated:].std())
        assert actual.subset(list(cfg.treated_units)).equals(
            truth.counterfactual.with_data({}, source="simulated"))
    assert abs(np.mean(mean_t) - np.mean(mean_d)) < 3 * np.std(mean_d) / np.sqrt(30)


def test_config_validation():
    with pytest.raises(InfeasibleShares):
        simulate_panel(DgpConfig(shares=(0.5, 0.5, 0.5, 0, 0)))
    with pytest.raises(InfeasibleShares):
        simulate_panel(DgpConfig(treatment_effect=(0.1, 0, 0, 0, 0)))
    with pytest.raises(InfeasibleShares):
        simulate_panel(DgpConfig(idio_sd=-1))
    with pytest.raises(InfeasibleShares):
        simulate_panel(DgpConfig(me_gamma_pre=1.5))
    with pytest.raises(InfeasibleShares):
        simulate_panel(DgpConfig(weights=(0.5, 0.6)))
    with pytest.raises(InfeasibleShares):
        simulate_panel(DgpConfig(treatment_year=1991))


def test_measurement_error_attenuates_gdp_slope():
    """Planted gamma shows up as the attenuation of the measured counterfactual's slope."""
    slopes = []
    for seed in range(20):
        cfg = DgpConfig(seed=seed, me_gamma_pre=0.8, me_gamma_post=0.8)
        _, truth = simulate_panel(cfg)
        true = build_channel_lhs(truth.counterfactual)
        meas = build_channel_lhs(truth.measured_counterfactual)
        x_t = true.dlog_gdp - true.dlog_gdp.mean(axis=0)
        x_m = meas.dlog_gdp - meas.dlog_gdp.mean(axis=0)
        slopes.append(np.sum(x_t * x_m) / np.sum(x_m * x_m))
    assert abs(np.mean(slopes) - 0.8) < 0.05


def test_truth_record_is_json():
    _, truth = simulate_panel(DgpConfig(n_treated=2, n_donors=3, treatment_effect=(0, 0, 0, -0.2, 0.2)))
    rec = json.loads(json.dumps(truth.to_json()))
    assert rec["treatment_effect"]["unsmoothed"] == 0.2
    assert set(rec["shares_pre"]) == set(CHANNELS)
    assert len(rec["weights"]["T01"]) == 3
