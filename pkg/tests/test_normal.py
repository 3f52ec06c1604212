import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from imci import dist
from imci.errors import DomainError
from imci.interval import Method
from imci.normal import (
    NormalData,
    bayes_normal_bounds,
    bayes_normal_ci,
    bayes_normal_posterior_pdf,
    im_normal_ci,
    im_normal_plausibility,
)

# published Bayes endpoints for x = 0.45: (w, r) -> ((l90, u90), (l95, u95))
PUBLISHED_BAYES = {
    (0.01, 5): ((0.3599, 0.5401), (0.3351, 0.5649)),
    (0.10, 5): ((0.1766, 0.7234), (0.1106, 0.7894)),
    (1.0, 10): ((0.0000, 0.9042), (0.0000, 1.0419)),
    (1.0, 50): ((0.2138, 0.6862), (0.1675, 0.7325)),
    (0.50, 20): ((0.1811, 0.7189), (0.1274, 0.7726)),
    (10.0, 5): ((0.0000, 3.0651), (0.0000, 3.8400)),
}

data = st.builds(
    NormalData,
    x=st.floats(-3.0, 5.0),
    w=st.floats(0.01, 10.0),
    r=st.integers(1, 60),
)
alphas = st.sampled_from([0.01, 0.05, 0.10, 0.20])


@pytest.mark.parametrize("key", sorted(PUBLISHED_BAYES))
@pytest.mark.parametrize("idx, alpha", [(0, 0.10), (1, 0.05)])
def test_bayes_matches_published_table(key, idx, alpha):
    w, r = key
    ci = bayes_normal_ci(NormalData(0.45, w, r), alpha)
    lo, hi = PUBLISHED_BAYES[key][idx]
    assert round(ci.lower, 4) == pytest.approx(lo, abs=1e-4)
    assert round(ci.upper, 4) == pytest.approx(hi, abs=1e-4)


@pytest.mark.parametrize("w, r", [(0.01, 5), (0.10, 5), (1.0, 10), (1.0, 50), (5.0, 20), (0.5, 3)])
@pytest.mark.parametrize("alpha", [0.10, 0.05])
def test_bayes_matches_quadrature_oracle(w, r, alpha):
    ci = bayes_normal_ci(NormalData(0.45, w, r), alpha)
    lo, hi = oracles.normal_bayes_equal_density(0.45, w, r, alpha)
    assert ci.lower == pytest.approx(lo, abs=1e-7)
    assert ci.upper == pytest.approx(hi, abs=1e-7)


def test_bayes_matches_grid_oracle():
    ci = bayes_normal_ci(NormalData(0.45, 1.0, 10), 0.10)
    lo, hi = oracles.normal_bayes_hpd(0.45, 1.0, 10, 0.10)
    assert ci.lower == pytest.approx(lo, abs=0.01)
    assert ci.upper == pytest.approx(hi, abs=0.01)


def test_bayes_large_t_limit():
    d = NormalData(50.0, 0.01, 7)
    ci = bayes_normal_ci(d, 0.10)
    half = dist.t_quantile(7, 0.95) * d.s
    assert ci.lower == pytest.approx(d.x - half, abs=1e-9)
    assert ci.upper == pytest.approx(d.x + half, abs=1e-9)


def test_bayes_truncation_flag():
    assert bayes_normal_ci(NormalData(0.45, 1.0, 10), 0.1).truncated_lower
    assert not bayes_normal_ci(NormalData(0.45, 0.01, 5), 0.1).truncated_lower


@given(data, alphas)
def test_bayes_interval_has_posterior_mass(d, alpha):
    ci = bayes_normal_ci(d, alpha)
    s = d.s
    # upper-tail form keeps relative precision when the posterior sits far from x
    tail = lambda v: dist.t_cdf(d.r, (d.x - v) / s)
    mass = (tail(ci.lower) - tail(ci.upper)) / tail(0.0)
    assert mass == pytest.approx(1 - alpha, abs=1e-7)
    assert 0.0 <= ci.lower <= ci.upper


@given(data, alphas)
def test_bayes_interval_is_level_set(d, alpha):
    ci = bayes_normal_ci(d, alpha)
    g_lo, g_hi = bayes_normal_posterior_pdf(d, [ci.lower, ci.upper])
    if ci.lower > 0:
        assert g_lo == pytest.approx(g_hi, rel=1e-6)
    else:
        assert g_lo >= g_hi * (1 - 1e-9)


def test_posterior_pdf_normalized():
    from scipy import integrate

    d = NormalData(-0.3, 0.8, 6)
    val = integrate.quad(lambda t: float(bayes_normal_posterior_pdf(d, t)), 0, np.inf)[0]
    assert val == pytest.approx(1.0, abs=1e-8)


def test_vectorized_bounds_agree_with_scalar():
    x = np.array([0.45, -0.2, 2.0])
    w = np.array([0.01, 1.0, 3.0])
    lo, hi, _ = bayes_normal_bounds(x, w, 5, 0.1)
    for i in range(3):
        ci = bayes_normal_ci(NormalData(x[i], w[i], 5), 0.1)
        assert (lo[i], hi[i]) == pytest.approx((ci.lower, ci.upper), abs=1e-9)


def test_im_closed_form_example():
    ci = im_normal_ci(NormalData(0.45, 0.01, 5), 0.10)
    assert ci.method is Method.IM
    assert (round(ci.lower, 4), round(ci.upper, 4)) == (0.3599, 0.5401)


def test_im_degenerate_at_boundary():
    ci = im_normal_ci(NormalData(-1.0, 0.01, 5), 0.10)
    assert (ci.lower, ci.upper) == (0.0, 0.0)
    assert ci.truncated_lower and ci.truncated_upper


@pytest.mark.parametrize("alpha", [0.0, 1.0, 1.5, -0.1])
def test_invalid_alpha(alpha):
    with pytest.raises(DomainError):
        im_normal_ci(NormalData(0.1, 1.0, 5), alpha)
    with pytest.raises(DomainError):
        bayes_normal_ci(NormalData(0.1, 1.0, 5), alpha)


@pytest.mark.parametrize("kwargs", [dict(x=1.0, w=0.0, r=5), dict(x=1.0, w=1.0, r=0), dict(x=1.0, w=1.0, r=2.5)])
def test_normal_data_validation(kwargs):
    with pytest.raises(DomainError):
        NormalData(**kwargs)


def test_plausibility_examples():
    d = NormalData(3.0, 1.0, 10)
    assert im_normal_plausibility(d, 3.0) == 1.0
    assert im_normal_plausibility(NormalData(0.0, 1.0, 10), 0.0) == 1.0
    v = dist.scaled_t_quantile(10, 0.975)
    assert im_normal_plausibility(d, 3.0 - v) == pytest.approx(0.05, abs=1e-9)
    assert im_normal_plausibility(d, 3.0 + v) == pytest.approx(0.05, abs=1e-9)
    with pytest.raises(DomainError):
        im_normal_plausibility(d, -0.1)


@given(data, alphas)
def test_plausibility_interval_duality(d, alpha):
    ci = im_normal_ci(d, alpha)
    grid = np.linspace(0.0, max(ci.upper, 0.0) + 2.0, 401)
    pl = im_normal_plausibility(d, grid)
    inside = (grid > ci.lower) & (grid < ci.upper)
    # exclude points within rounding distance of the endpoints
    near = (np.abs(grid - ci.lower) < 1e-9) | (np.abs(grid - ci.upper) < 1e-9)
    assert np.array_equal(inside[~near], (pl > alpha)[~near])


@given(data)
def test_plausibility_peaks_at_projection(d):
    grid = np.linspace(0.0, 6.0, 301)
    pl = im_normal_plausibility(d, grid)
    assert np.all((pl >= 0) & (pl <= 1))
    assert im_normal_plausibility(d, max(0.0, d.x)) == 1.0
    top = int(np.argmax(pl))
    assert np.all(np.diff(pl[: top + 1]) >= -1e-12)
    assert np.all(np.diff(pl[top:]) <= 1e-12)


def _simulate(theta, r, n, seed):
    gen = np.random.default_rng(seed)
    x = theta + gen.standard_normal(n)
    w = gen.chisquare(r, n)
    return x, w


@pytest.mark.parametrize("theta", [0.0, 0.5, 4.0])
@pytest.mark.parametrize("alpha", [0.05, 0.10])
def test_plausibility_validity(theta, alpha):
    n = 4000
    x, w = _simulate(theta, 5, n, 7)
    pl = np.array([im_normal_plausibility(NormalData(xi, wi, 5), theta) for xi, wi in zip(x, w)])
    freq = np.mean(pl <= alpha)
    assert freq <= alpha + 3 * math.sqrt(alpha * (1 - alpha) / n)


def test_interior_coverage_is_exact():
    n = 20000
    x, w = _simulate(4.0, 8, n, 3)
    from imci.normal import im_normal_bounds

    lo, hi, _, _ = im_normal_bounds(x, w, 8, 0.10)
    cov = np.mean((lo <= 4.0) & (4.0 <= hi))
    assert abs(cov - 0.90) <= 3 * math.sqrt(0.09 / n)
