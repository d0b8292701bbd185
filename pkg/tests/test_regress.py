import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import dense_cluster_vcov, dense_ols, dense_pcse_vcov, dense_white_vcov
from riskshare.errors import (
    CollinearAfterDummies,
    RankDeficient,
    TooFewClusters,
    UnbalancedForPcse,
    UnknownVariable,
)
from riskshare.regress import (
    DesignMatrix,
    Observations,
    Terms,
    VcovKind,
    VcovSpec,
    build_design,
    ols_fit,
    residualize,
)


def _design(X, unit=None, year=None, cluster=None):
    n = X.shape[0]
    unit = np.arange(n) if unit is None else np.asarray(unit)
    year = np.zeros(n, dtype=int) if year is None else np.asarray(year)
    cluster = unit if cluster is None else np.asarray(cluster)
    return DesignMatrix(X, tuple(f"c{j}" for j in range(X.shape[1])), unit, year, cluster)


def test_exact_fit_has_zero_vcov():
    rng = np.random.default_rng(0)
    X = np.column_stack([np.ones(10), rng.normal(size=10)])
    b = np.array([1.5, -2.0])
    for kind in VcovKind:
        unit = np.repeat([0, 1], 5)
        year = np.tile(np.arange(5), 2)
        fit = ols_fit(X @ b, _design(X, unit, year, unit), VcovSpec(kind))
        assert np.allclose(fit.coef, b, atol=1e-10)
        assert np.all(np.abs(np.diag(fit.vcov)) < 1e-10)


def test_singleton_clusters_equal_white_sandwich():
    rng = np.random.default_rng(1)
    X = np.column_stack([np.ones(15), rng.normal(size=(15, 2))])
    y = X @ [1, 2, 3] + rng.normal(size=15) * (1 + np.abs(X[:, 1]))
    fit = ols_fit(y, _design(X), VcovSpec("clustered", small_sample=False))
    _, resid, _ = dense_ols(y, X)
    assert np.max(np.abs(fit.vcov - dense_white_vcov(X, resid))) < 1e-12


def test_eight_rows_two_clusters_matches_hand_sandwich():
    X = np.column_stack([np.ones(8), np.array([0.5, 1.0, -0.3, 2.0, 1.1, -1.0, 0.0, 0.7])])
    y = np.array([1.0, 2.1, 0.2, 3.9, 2.5, -0.4, 1.2, 1.6])
    cl = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    fit = ols_fit(y, _design(X, cluster=cl), VcovSpec("clustered"))
    b, resid, _ = dense_ols(y, X)
    assert np.allclose(fit.coef, b, atol=1e-12)
    assert np.max(np.abs(fit.vcov - dense_cluster_vcov(X, resid, cl))) < 1e-12
    assert fit.inference_df == 1


@given(st.integers(2, 12), st.integers(0, 2 ** 31))
def test_clustered_vcov_matches_dense(n_clusters, seed):
    rng = np.random.default_rng(seed)
    n = n_clusters * 3 + 2
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    y = rng.normal(size=n)
    cl = np.concatenate([np.arange(n_clusters), rng.integers(0, n_clusters, n - n_clusters)])
    fit = ols_fit(y, _design(X, cluster=cl), VcovSpec("clustered"))
    _, resid, _ = dense_ols(y, X)
    ref = dense_cluster_vcov(X, resid, cl)
    assert np.max(np.abs(fit.vcov - ref)) < 1e-12 * max(1.0, np.abs(ref).max())


@given(st.integers(2, 6), st.integers(0, 2 ** 31))
def test_pcse_matches_dense_kronecker(P, seed):
    rng = np.random.default_rng(seed)
    T = P + int(rng.integers(0, 4))
    unit = np.repeat(np.arange(P), T)
    year = np.tile(np.arange(2000, 2000 + T), P)
    perm = rng.permutation(P * T)
    unit, year = unit[perm], year[perm]
    X = np.column_stack([np.ones(P * T), rng.normal(size=P * T)])
    y = rng.normal(size=P * T) + 0.5 * X[:, 1]
    fit = ols_fit(y, _design(X, unit, year), VcovSpec("panel_corrected"))
    _, resid, _ = dense_ols(y, X)
    ref = dense_pcse_vcov(X, resid, unit, year)
    assert np.max(np.abs(fit.vcov - ref)) < 1e-12 * max(1.0, np.abs(ref).max())


def test_pcse_rejects_unbalanced_and_short():
    X = np.column_stack([np.ones(5), np.arange(5.0)])
    with pytest.raises(UnbalancedForPcse):
        ols_fit(np.arange(5.0) ** 2, _design(X, [0, 0, 1, 1, 1], [0, 1, 0, 1, 2]), VcovSpec("panel_corrected"))
    X = np.column_stack([np.ones(6), np.array([1.0, 3, 2, 5, 4, 4])])
    with pytest.raises(UnbalancedForPcse):
        ols_fit(np.arange(6.0) ** 2, _design(X, [0, 1, 2, 0, 1, 2], [0, 0, 0, 1, 1, 1]), VcovSpec("panel_corrected"))


def test_homoskedastic_matches_textbook():
    rng = np.random.default_rng(3)
    X = np.column_stack([np.ones(30), rng.normal(size=30)])
    y = X @ [0.3, 1.2] + rng.normal(size=30)
    fit = ols_fit(y, _design(X), VcovSpec("homoskedastic"))
    b, resid, inv = dense_ols(y, X)
    assert np.allclose(fit.vcov, inv * (resid @ resid) / 28, atol=1e-14)
    assert np.isclose(fit.r2, 1 - resid @ resid / np.sum((y - y.mean()) ** 2))


def test_errors():
    X = np.column_stack([np.ones(4), np.ones(4)])
    with pytest.raises(RankDeficient):
        ols_fit(np.arange(4.0), _design(X))
    X = np.column_stack([np.ones(4), np.arange(4.0)])
    with pytest.raises(TooFewClusters):
        ols_fit(np.arange(4.0) ** 2, _design(X, cluster=np.zeros(4)), VcovSpec("clustered"))
    with pytest.raises(ValueError):
        VcovSpec("robust")


def test_design_intercept_and_slope():
    obs = Observations({"x": np.array([1.0, 2.0, 3.0])}, ["a", "b", "c"], [1, 2, 3])
    d = build_design(obs, Terms(slopes=("x",)))
    assert d.columns == ("const", "x")
    assert np.array_equal(d.X, [[1, 1], [1, 2], [1, 3]])


def test_year_dummies_drop_first():
    obs = Observations({"x": np.array([0.1, 0.5, 0.2, 0.9])}, list("abcd"), [1990, 1991, 1992, 1991])
    d = build_design(obs, Terms(slopes=("x",), dummies=("year",)))
    assert d.columns == ("const", "x", "year[1991]", "year[1992]")
    assert np.array_equal(d.X[:, 2], [0, 1, 0, 1]) and np.array_equal(d.X[:, 3], [0, 0, 1, 0])


def test_stacked_did_design_enumerated_by_hand():
    # 2 units (one synthetic, one actual) x 4 years, post from year 3
    years = [1990, 1991, 1992, 1993]
    x = np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8])
    tr = np.array([0, 0, 0, 0, 1, 1, 1, 1.0])
    eur = np.array([0, 0, 1, 1, 0, 0, 1, 1.0])
    obs = Observations({"x": x, "Tr": tr, "Eur": eur}, ["s"] * 4 + ["a"] * 4, years * 2)
    d = build_design(obs, Terms(slopes=("x",), interactions=(("Tr", "x"), ("Eur", "x"), ("Tr", "Eur", "x")),
                                dummies=("year",)))
    assert d.columns == ("const", "x", "Tr:x", "Eur:x", "Tr:Eur:x", "year[1991]", "year[1992]", "year[1993]")
    expected = []
    for k in range(8):
        y = years[k % 4]
        expected.append([1, x[k], tr[k] * x[k], eur[k] * x[k], tr[k] * eur[k] * x[k],
                         y == 1991, y == 1992, y == 1993])
    assert np.array_equal(d.X, np.array(expected, dtype=float))


def test_group_dummies_per_group():
    obs = Observations({"g": np.array([0, 0, 1, 1.0])}, list("abcd"), [1, 2, 1, 2])
    d = build_design(obs, Terms(group_dummies=(("g", "year"),)), check_rank=False)
    assert d.columns == ("const", "g[0]:year[2]", "g[1]:year[2]")


def test_collinear_design_names_columns():
    obs = Observations({"x": np.array([1.0, 2, 3]), "z": np.array([2.0, 4, 6])}, list("abc"), [1, 2, 3])
    with pytest.raises(CollinearAfterDummies, match="z|x"):
        build_design(obs, Terms(slopes=("x", "z")))
    with pytest.raises(UnknownVariable):
        build_design(obs, Terms(slopes=("w",)))


@given(st.integers(0, 2 ** 31))
def test_residualize_is_orthogonal(seed):
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(20, 3))
    M = rng.normal(size=(20, 2))
    R = residualize(M, Z)
    assert np.max(np.abs(Z.T @ R)) < 1e-10
