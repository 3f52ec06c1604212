import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from imci.empirical import ecdf_grid, empirical_cdf, empirical_quantile, ks_uniform_distance

samples = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=200)


def test_quantile_rank_rule():
    draws = np.array([4.0, 1.0, 3.0, 2.0, 5.0])
    assert empirical_quantile(draws, 0.5) == 3.0
    # q (n - 1) = 0.1 * 4 = 0.4: 40% of the way from the 1st to the 2nd order statistic
    assert empirical_quantile(draws, 0.1) == pytest.approx(1.4)
    assert empirical_quantile(draws, 0.0) == 1.0
    assert empirical_quantile(draws, 1.0) == 5.0


def test_cdf_counts_ties():
    s = np.array([0.0, 0.0, 1.0, 2.0])
    assert empirical_cdf(s, 0.0) == 0.5
    assert empirical_cdf(s, -1e-12) == 0.0
    assert np.allclose(empirical_cdf(s, [1.0, 1.5, 2.0]), [0.75, 0.75, 1.0])


@given(samples)
def test_ks_matches_scipy_for_continuous_samples(values):
    v = np.unique(values)
    assert ks_uniform_distance(v) == pytest.approx(stats.kstest(v, "uniform").statistic, abs=1e-12)


def test_ks_with_atom():
    # half the mass at exactly zero: the ecdf jumps to 0.5 at 0
    values = np.concatenate([np.zeros(50), np.linspace(0.01, 1.0, 50)])
    d = ks_uniform_distance(values)
    assert d == pytest.approx(0.5, abs=1e-12)


def test_ks_rejects_empty():
    with pytest.raises(ValueError):
        ks_uniform_distance(np.array([]))


def test_ecdf_grid_endpoints():
    g = ecdf_grid(np.random.default_rng(0).uniform(size=1000))
    assert g[0, 0] == 0.0 and g[-1, 0] == 1.0
    assert g[-1, 1] == 1.0
    assert g[0, 1] <= 0.01
    assert np.all(np.diff(g[:, 1]) >= 0)
