"""Independent reference implementations used by the tests.

Each oracle recomputes a quantity by a different route than the package
(explicit loops, dense matrices, exhaustive grids) so agreement is evidence
rather than tautology.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


# ---------------------------------------------------------------- covariance

def dense_ols(y, X):
    XtX_inv = np.linalg.inv(X.T @ X)
    b = XtX_inv @ X.T @ y
    return b, y - X @ b, XtX_inv


def dense_cluster_vcov(X, resid, clusters, small_sample=True):
    """Sandwich with per-cluster score outer products, summed one at a time."""
    n, k = X.shape
    bread = np.linalg.inv(X.T @ X)
    meat = np.zeros((k, k))
    labels = list(dict.fromkeys(list(clusters)))
    for g in labels:
        idx = [i for i in range(n) if clusters[i] == g]
        s = np.zeros(k)
        for i in idx:
            s += X[i] * resid[i]
        meat += np.outer(s, s)
    V = bread @ meat @ bread
    if small_sample:
        G = len(labels)
        V *= G / (G - 1) * (n - 1) / (n - k)
    return V


def dense_white_vcov(X, resid):
    bread = np.linalg.inv(X.T @ X)
    meat = sum(np.outer(X[i], X[i]) * resid[i] ** 2 for i in range(len(resid)))
    return bread @ meat @ bread


def dense_pcse_vcov(X, resid, unit, year):
    """``(X'X)^-1 X' Omega X (X'X)^-1`` with the full NT x NT ``Omega``."""
    units = sorted(set(unit))
    years = sorted(set(year))
    P, T = len(units), len(years)
    E = np.zeros((P, T))
    for i in range(len(resid)):
        E[units.index(unit[i]), years.index(year[i])] = resid[i]
    sigma = E @ E.T / T
    n = len(resid)
    omega = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            if year[a] == year[b]:
                omega[a, b] = sigma[units.index(unit[a]), units.index(unit[b])]
    bread = np.linalg.inv(X.T @ X)
    return bread @ X.T @ omega @ X @ bread


# ------------------------------------------------------------ simplex search

def _grid_points(n_free: int, steps: int):
    """All integer compositions of at most ``steps`` into ``n_free`` parts."""
    if n_free == 0:
        yield ()
        return
    for i in range(steps + 1):
        for rest in _grid_points(n_free - 1, steps - i):
            yield (i,) + rest


@lru_cache(maxsize=8)
def _lead(n_free: int, steps: int) -> np.ndarray:
    rows = list(_grid_points(n_free, steps))
    pts = np.array(rows, dtype=float).reshape(len(rows), n_free)
    pts.setflags(write=False)
    return pts


def grid_simplex_min(A, b, step=1e-3):
    """Minimum of ``||A w - b||^2`` over the simplex grid of the given step.

    The leading ``N-2`` coordinates are enumerated; along the last free
    coordinate the objective is a convex quadratic, so its best grid point
    is one of the two grid neighbours of the clipped continuous minimiser.
    The result is exactly the minimum over every grid point.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    N = A.shape[1]
    steps = int(round(1 / step))
    if N == 1:
        r = A[:, 0] - b
        return float(r @ r), np.ones(1)
    best = (math.inf, None)
    lead = _lead(N - 2, steps)
    used = lead.sum(axis=1)
    rem = steps - used
    base = (A[:, :N - 2] @ lead.T) * step if N > 2 else np.zeros((A.shape[0], len(lead)))
    # w_last2 = t * step, w_last = (rem - t) * step
    a1, a2 = A[:, N - 2], A[:, N - 1]
    c0 = base + np.outer(a2, rem * step) - b[:, None]
    d = (a1 - a2) * step
    dd = d @ d
    t_star = -(d @ c0) / dd if dd > 0 else np.zeros(len(lead))
    for t in (np.floor(t_star), np.ceil(t_star)):
        t = np.clip(t, 0, rem)
        r = c0 + np.outer(d, t)
        f = np.einsum("ij,ij->j", r, r)
        j = int(np.argmin(f))
        if f[j] < best[0]:
            w = np.concatenate([lead[j], [t[j], rem[j] - t[j]]]) * step
            best = (float(f[j]), w)
    return best


# ---------------------------------------------------------------- channels

def lhs_by_loops(panel):
    """Channel left-hand sides and dlog GDP, one scalar at a time."""
    GDP, C, G, NI, DNI = (panel[v] for v in ("GDP", "C", "G", "NI", "DNI"))
    n, T = GDP.shape
    out = {k: np.zeros((n, T - 1)) for k in ("m", "g", "p", "s", "u", "x")}
    for i in range(n):
        for t in range(1, T):
            def dl(a):
                return math.log(a[t]) - math.log(a[t - 1])
            h = [DNI[i, s] + G[i, s] for s in range(T)]
            q = [C[i, s] + G[i, s] for s in range(T)]
            out["x"][i, t - 1] = dl(GDP[i])
            out["m"][i, t - 1] = dl(GDP[i]) - dl(NI[i])
            out["g"][i, t - 1] = dl(NI[i]) - dl(DNI[i])
            out["p"][i, t - 1] = dl(DNI[i]) - dl(h)
            out["s"][i, t - 1] = dl(h) - dl(q)
            out["u"][i, t - 1] = dl(q)
    return out


def demeaned_ratio(x, y):
    """``sum (x - xbar_t)(y - ybar_t) / sum (x - xbar_t)^2`` with explicit year loops."""
    num = den = 0.0
    n, T = x.shape
    for t in range(T):
        xb = sum(x[:, t]) / n
        yb = sum(y[:, t]) / n
        for i in range(n):
            num += (x[i, t] - xb) * (y[i, t] - yb)
            den += (x[i, t] - xb) ** 2
    return num / den


def cell_slopes_separate(x, y, year, mask):
    """Slope on x in a regression of y on x and a full set of year dummies, one cell."""
    xs, ys, yr = x[mask], y[mask], year[mask]
    levels = sorted(set(yr.tolist()))
    D = np.column_stack([(yr == lv).astype(float) for lv in levels])
    Z = np.column_stack([xs, D])
    coef, *_ = np.linalg.lstsq(Z, ys, rcond=None)
    return coef[0]


def normal_equations_detrend(y):
    T = len(y)
    t = np.arange(T, dtype=float)
    X = np.column_stack([np.ones(T), t, t * t])
    b = np.linalg.solve(X.T @ X, X.T @ y)
    return y - X @ b
