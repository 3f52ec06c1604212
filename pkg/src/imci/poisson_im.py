"""Monte Carlo IM interval for the Poisson signal rate.

For observed ``(x, w)`` the association brackets ``lam`` between the two
random endpoints

    lam1 = G_x^{-1}(1 - U) - G_{w+1}^{-1}(1 - V) / m
    lam2 = G_{x+1}^{-1}(1 - U) - G_w^{-1}(1 - V) / m

(``G_a`` the unit-scale gamma cdf, ``U, V`` independent uniforms), both
clipped at zero. The distributions of ``lam1`` and ``lam2`` have no closed
form, so they are replaced by the empirical cdfs of ``n`` paired draws.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from . import dist
from .empirical import empirical_cdf, empirical_quantile
from .errors import DomainError
from .interval import Interval, Method, check_alpha
from .poisson_bayes import PoissonData

DEFAULT_MC_SAMPLES = 10_000

# Substream ids under a seed: the count equation and the background equation
# draw from separate streams so their draws depend only on x and w respectively.
COUNT_STREAM = 0
BACKGROUND_STREAM = 1


@dataclass(frozen=True, eq=False)
class EndpointSample:
    lower_draws: np.ndarray
    upper_draws: np.ndarray
    n: int
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "_lo_sorted", np.sort(self.lower_draws))
        object.__setattr__(self, "_hi_sorted", np.sort(self.upper_draws))

    def lower_cdf(self, t):
        return empirical_cdf(self._lo_sorted, t)

    def upper_cdf(self, t):
        return empirical_cdf(self._hi_sorted, t)

    def interval(self, alpha: float) -> Interval:
        alpha = check_alpha(alpha)
        lo = max(0.0, empirical_quantile(self._lo_sorted, alpha / 2))
        hi = max(0.0, empirical_quantile(self._hi_sorted, 1 - alpha / 2))
        return Interval(lo, hi, 1 - alpha, Method.IM, truncated_lower=lo == 0.0, truncated_upper=hi == 0.0)

    def plausibility(self, lambda0):
        """Plausibility of ``lam = lambda0`` from the empirical endpoint cdfs."""
        lambda0 = np.asarray(lambda0, dtype=float)
        if np.any(~(lambda0 >= 0.0)):
            raise DomainError("lambda0 must be nonnegative")
        k_lo = np.asarray(self.lower_cdf(lambda0))
        k_hi = np.asarray(self.upper_cdf(lambda0))
        boundary = np.where(k_lo < 0.5, 2.0 * k_lo, 1.0)
        interior = np.where(
            k_lo < 0.5, 2.0 * k_lo, np.where(k_hi > 0.5, 2.0 * (1.0 - k_hi), 1.0)
        )
        out = np.where(lambda0 == 0.0, boundary, interior)
        return float(out) if out.ndim == 0 else out


def sample_endpoint_pair(d: PoissonData, u, u_tilde):
    """Endpoint pair ``(lam1, lam2)`` for given auxiliary uniforms."""
    u = np.asarray(u, dtype=float)
    u_tilde = np.asarray(u_tilde, dtype=float)
    count_lo = dist.gamma_quantile(d.x, 1.0 - u)
    count_hi = dist.gamma_quantile(d.x + 1, 1.0 - u)
    bg_hi = dist.gamma_quantile(d.w + 1, 1.0 - u_tilde)
    bg_lo = dist.gamma_quantile(d.w, 1.0 - u_tilde)
    lam1 = np.maximum(0.0, count_lo - bg_hi / d.m)
    lam2 = np.maximum(0.0, count_hi - bg_lo / d.m)
    if lam1.ndim == 0:
        return float(lam1), float(lam2)
    return lam1, lam2


@functools.lru_cache(maxsize=512)
def _gamma_edges(shape: int, n: int, seed: int, stream_id: int) -> tuple[np.ndarray, np.ndarray]:
    """``(G_shape^{-1}(1 - U), G_{shape+1}^{-1}(1 - U))`` for ``n`` uniforms."""
    u = dist.RngStream(seed, stream_id).uniform01(n)
    lo = np.asarray(dist.gamma_quantile(shape, 1.0 - u), dtype=float)
    hi = np.asarray(dist.gamma_quantile(shape + 1, 1.0 - u), dtype=float)
    lo.setflags(write=False)
    hi.setflags(write=False)
    return lo, hi


def build_endpoint_sample(
    d: PoissonData, n: int = DEFAULT_MC_SAMPLES, seed: int = 0, background_seed: int | None = None
) -> EndpointSample:
    """Draw ``n`` paired endpoints; identical for identical ``(d, n, seed)``.

    Each pair shares its ``(U, V)`` draw, so ``lam1 <= lam2`` holds draw by
    draw. ``V`` comes from ``background_seed`` when given (default: ``seed``).
    Gamma quantile arrays are memoized per ``(count, n, seed)``.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    bg_seed = seed if background_seed is None else background_seed
    count_lo, count_hi = _gamma_edges(int(d.x), int(n), int(seed), COUNT_STREAM)
    bg_lo, bg_hi = _gamma_edges(int(d.w), int(n), int(bg_seed), BACKGROUND_STREAM)
    lam1 = np.maximum(0.0, count_lo - bg_hi / d.m)
    lam2 = np.maximum(0.0, count_hi - bg_lo / d.m)
    return EndpointSample(lam1, lam2, int(n), int(seed))


def im_poisson_ci(d: PoissonData, alpha: float, n: int = DEFAULT_MC_SAMPLES, seed: int = 0) -> Interval:
    alpha = check_alpha(alpha)
    return build_endpoint_sample(d, n, seed).interval(alpha)


def im_poisson_plausibility(d: PoissonData, lambda0, n: int = DEFAULT_MC_SAMPLES, seed: int = 0):
    return build_endpoint_sample(d, n, seed).plausibility(lambda0)
