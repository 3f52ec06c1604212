"""Empirical quantiles, empirical cdfs and a KS distance to Unif(0, 1)."""

from __future__ import annotations

import numpy as np


def empirical_quantile(draws: np.ndarray, q):
    """Order-statistic quantile with linear interpolation.

    Interpolates between the sorted draws at 1-based ranks
    ``floor(q (n - 1)) + 1`` and ``+ 2`` (numpy's default "linear" rule).
    """
    out = np.quantile(np.asarray(draws, dtype=float), q, method="linear")
    return float(out) if np.ndim(out) == 0 else out


def empirical_cdf(sorted_draws: np.ndarray, t):
    """Fraction of draws ``<= t``; ``sorted_draws`` must be ascending."""
    n = sorted_draws.size
    out = np.searchsorted(sorted_draws, np.asarray(t, dtype=float), side="right") / n
    return float(out) if np.ndim(out) == 0 else out


def ks_uniform_distance(values: np.ndarray) -> float:
    """Sup distance between the ecdf of ``values`` and the Unif(0, 1) cdf.

    Ties are handled exactly: the ecdf is evaluated just before and at each
    distinct value.
    """
    v = np.sort(np.clip(np.asarray(values, dtype=float), 0.0, 1.0))
    n = v.size
    if n == 0:
        raise ValueError("need at least one value")
    distinct, first = np.unique(v, return_index=True)
    last = np.append(first[1:], n)
    above = last / n - distinct
    below = distinct - first / n
    return float(max(above.max(), below.max()))


def ecdf_grid(values: np.ndarray, points: int = 101) -> np.ndarray:
    """``(p, ecdf(p))`` pairs on an even grid over [0, 1]."""
    grid = np.linspace(0.0, 1.0, points)
    v = np.sort(np.asarray(values, dtype=float))
    return np.column_stack([grid, empirical_cdf(v, grid)])
