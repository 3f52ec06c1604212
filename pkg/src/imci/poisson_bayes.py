"""Posterior and HPD credible interval for a Poisson signal rate.

Model: ``X = B + S`` with ``B ~ Poisson(eps)``, ``S ~ Poisson(lam)`` and a
background monitor ``W ~ Poisson(m * eps)``. With the improper prior
``eps^(a-1) exp(-b eps)`` (flat in ``lam``) the marginal posterior of ``lam`` is
a finite mixture of unit-scale gamma densities with shapes ``x - k + 1``,
``k = 0..x``. All mixture weights are handled in log space.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from . import dist
from .errors import ConvergenceError, DomainError
from .interval import Interval, Method, check_alpha

_GRID_POINTS = 20001


@dataclass(frozen=True)
class PoissonData:
    x: int
    w: int
    m: float

    def __post_init__(self) -> None:
        for name in ("x", "w"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise DomainError(f"{name} must be a nonnegative integer")
        if not self.m > 0 or not math.isfinite(self.m):
            raise DomainError("m must be positive")


@dataclass(frozen=True)
class PriorSpec:
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise DomainError("prior shape a must be positive")
        if not self.b >= 0:
            raise DomainError("prior rate b must be nonnegative")


def _log_marginal_terms(x: int, w: int, m: float, a: float, b: float) -> np.ndarray:
    k = np.arange(x + 1, dtype=float)
    return (
        special.gammaln(a + w + k)
        - special.gammaln(w + 1.0)
        - special.gammaln(k + 1.0)
        + w * math.log(m)
        - (a + w + k) * math.log(b + m + 1.0)
    )


@functools.lru_cache(maxsize=65536)
def _mixture(x: int, w: int, m: float, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Gamma shapes ``x - k + 1`` and normalized weights for ``k = 0..x``."""
    terms = _log_marginal_terms(x, w, m, a, b)
    logw = terms - special.logsumexp(terms)
    shapes = x - np.arange(x + 1, dtype=float) + 1.0
    weights = np.exp(logw)
    weights.setflags(write=False)
    shapes.setflags(write=False)
    return shapes, weights


def mixture_weights(d: PoissonData, p: PriorSpec = PriorSpec()) -> tuple[np.ndarray, np.ndarray]:
    return _mixture(int(d.x), int(d.w), float(d.m), float(p.a), float(p.b))


def _check_lambda(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if np.any(~(lam >= 0.0)):
        raise DomainError("lambda must be nonnegative")
    return lam


def posterior_log_density(d: PoissonData, p: PriorSpec, lam):
    lam = _check_lambda(lam)
    x, w = int(d.x), int(d.w)
    marg = _log_marginal_terms(x, w, d.m, p.a, p.b)
    k = np.arange(x + 1, dtype=float)
    lam_b = lam[..., None]
    terms = (
        marg
        - special.gammaln(x - k + 1.0)
        - lam_b
        + special.xlogy(x - k, lam_b)
    )
    out = special.logsumexp(terms, axis=-1) - special.logsumexp(marg)
    return float(out) if out.ndim == 0 else out


def _pdf(shapes: np.ndarray, weights: np.ndarray, lam: float) -> float:
    logf = special.xlogy(shapes - 1.0, lam) - lam - special.gammaln(shapes)
    return float(np.dot(weights, np.exp(logf)))


def _log_slope(shapes: np.ndarray, weights: np.ndarray, lam):
    """Derivative of the log posterior density, computed without underflow.

    Uses ``d/dl f_s = f_{s-1} - f_s`` with ``f_0 = 0``, so the log slope is
    ``sum w f_{s-1} / sum w f_s - 1``; both sums are formed in log space.
    Accepts a scalar or an array of ``lam``.
    """
    lam_b = np.asarray(lam, dtype=float)[..., None]
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    logf = logw + special.xlogy(shapes - 1.0, lam_b) - lam_b - special.gammaln(shapes)
    upper = shapes > 1.0
    if not np.any(upper):
        out = np.full(lam_b.shape[:-1], -1.0)
    else:
        s_up = shapes[upper]
        logf_lower = logw[upper] + special.xlogy(s_up - 2.0, lam_b) - lam_b - special.gammaln(s_up - 1.0)
        out = np.exp(special.logsumexp(logf_lower, axis=-1) - special.logsumexp(logf, axis=-1)) - 1.0
    return float(out) if out.ndim == 0 else out


def _cdf(shapes: np.ndarray, weights: np.ndarray, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    return np.dot(special.gammainc(shapes, lam[..., None]), weights)


def posterior_pdf(d: PoissonData, p: PriorSpec, lam):
    return np.exp(posterior_log_density(d, p, lam))


def posterior_cdf(d: PoissonData, p: PriorSpec, lam):
    """Posterior cdf as a weighted sum of gamma cdfs."""
    lam = _check_lambda(lam)
    shapes, weights = mixture_weights(d, p)
    out = np.clip(_cdf(shapes, weights, lam), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def _upper_bracket(shapes: np.ndarray) -> float:
    top = float(shapes.max())
    return top + 10.0 * math.sqrt(top) + 20.0


def posterior_quantile(d: PoissonData, p: PriorSpec, q: float) -> float:
    if not 0.0 < q < 1.0:
        raise DomainError("q must lie in (0, 1)")
    shapes, weights = mixture_weights(d, p)
    hi = _upper_bracket(shapes)
    while _cdf(shapes, weights, hi) < q:
        hi *= 2.0
    return optimize.brentq(
        lambda t: float(_cdf(shapes, weights, t)) - q, 0.0, hi, xtol=1e-13, rtol=1e-15
    )


def equal_tail_ci(d: PoissonData, p: PriorSpec, alpha: float) -> tuple[float, float]:
    alpha = check_alpha(alpha)
    return posterior_quantile(d, p, alpha / 2), posterior_quantile(d, p, 1 - alpha / 2)


def is_unimodal(d: PoissonData, p: PriorSpec = PriorSpec(), points: int = 400) -> bool:
    """Check the density slope changes sign at most once on a log grid."""
    shapes, weights = mixture_weights(d, p)
    grid = np.geomspace(1e-8, 2.0 * _upper_bracket(shapes), points)
    slopes = _log_slope(shapes, weights, grid)
    signs = np.sign(np.where(np.abs(slopes) > 1e-12, slopes, 0.0))
    signs = signs[signs != 0]
    return int(np.count_nonzero(np.diff(signs) != 0)) <= 1 and (
        signs.size == 0 or signs[-1] < 0
    )


def _mode(shapes: np.ndarray, weights: np.ndarray) -> float:
    if _log_slope(shapes, weights, 1e-300) <= 0.0:
        return 0.0
    hi = _upper_bracket(shapes)
    return optimize.brentq(lambda t: _log_slope(shapes, weights, t), 1e-300, hi, xtol=1e-14)


def _grid_hpd(shapes, weights, alpha):
    hi = _upper_bracket(shapes)
    while _cdf(shapes, weights, hi) < 1.0 - 1e-10:
        hi *= 2.0
    grid = np.linspace(0.0, hi, _GRID_POINTS)
    dens = np.array([_pdf(shapes, weights, t) for t in grid])
    step = grid[1] - grid[0]
    order = np.argsort(-dens, kind="stable")
    mass = np.cumsum(dens[order]) * step
    keep = order[: int(np.searchsorted(mass, 1.0 - alpha)) + 1]
    return float(grid[keep].min()), float(grid[keep].max())


def bayes_poisson_ci(d: PoissonData, p: PriorSpec = PriorSpec(), alpha: float = 0.1) -> Interval:
    """Highest-posterior-density interval ``{lam : g(lam) >= c}``.

    The level ``c`` is found by root-solving posterior mass ``= 1 - alpha``;
    for each trial ``c`` the endpoints are the roots of ``g = c`` on either
    side of the mode (the lower one is 0 when ``g(0) >= c``). A posterior that
    fails the unimodality check is handled on a fine grid instead and the
    returned interval carries ``grid_fallback=True``.
    """
    alpha = check_alpha(alpha)
    shapes, weights = mixture_weights(d, p)
    level = 1.0 - alpha

    if not is_unimodal(d, p):
        lo, hi = _grid_hpd(shapes, weights, alpha)
        return Interval(lo, hi, level, Method.BAYES, truncated_lower=lo == 0.0, grid_fallback=True)

    mode = _mode(shapes, weights)
    if mode == 0.0:
        # monotone density: every superlevel set starts at 0
        upper = posterior_quantile(d, p, level)
        return Interval(0.0, upper, level, Method.BAYES, truncated_lower=True)

    peak = _pdf(shapes, weights, mode)
    g0 = _pdf(shapes, weights, 0.0)
    bracket_hi = _upper_bracket(shapes)

    def endpoints(c: float) -> tuple[float, float]:
        hi = bracket_hi
        while _pdf(shapes, weights, hi) > c:
            hi *= 2.0
        upper = optimize.brentq(
            lambda t: _pdf(shapes, weights, t) - c, mode, hi, xtol=1e-14, rtol=1e-15
        )
        if g0 >= c:
            lower = 0.0
        else:
            lower = optimize.brentq(
                lambda t: _pdf(shapes, weights, t) - c, 0.0, mode, xtol=1e-14, rtol=1e-15
            )
        return lower, upper

    def excess_mass(c: float) -> float:
        lower, upper = endpoints(c)
        return float(_cdf(shapes, weights, upper) - _cdf(shapes, weights, lower)) - level

    c_lo, c_hi = peak * 1e-12, peak * (1.0 - 1e-12)
    if excess_mass(c_lo) < 0.0 or excess_mass(c_hi) > 0.0:
        raise ConvergenceError("HPD level search could not bracket the target mass")
    c = optimize.brentq(excess_mass, c_lo, c_hi, xtol=1e-15 * peak, rtol=1e-15, maxiter=200)
    lower, upper = endpoints(c)
    return Interval(lower, upper, level, Method.BAYES, truncated_lower=lower == 0.0)
