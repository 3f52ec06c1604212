"""Interval estimators for a nonnegative normal mean with unknown variance.

Data model: ``X ~ N(theta, sigma^2)`` and ``W ~ sigma^2 * chi2_r`` independent,
``theta >= 0``. Two procedures are provided:

* the highest-posterior-density interval under the improper prior
  ``f(theta, sigma) = 1 / sigma`` on ``theta >= 0``;
* the prior-free inferential-model (IM) interval built from the pivot
  ``(X - theta) / sqrt(W)``, whose cdf is the scaled-t cdf.

The ``*_bounds`` helpers are array versions used by the simulation harness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dist
from .errors import DomainError
from .interval import Interval, Method, check_alpha

_TINY = 1e-300


@dataclass(frozen=True)
class NormalData:
    x: float
    w: float
    r: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.x):
            raise DomainError("x must be finite")
        if not self.w > 0:
            raise DomainError("w must be positive")
        if int(self.r) != self.r or self.r < 1:
            raise DomainError("r must be a positive integer")

    @property
    def s(self) -> float:
        return float(np.sqrt(self.w / self.r))

    @property
    def t(self) -> float:
        return self.x / self.s


def bayes_normal_bounds(x, w, r, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized HPD endpoints ``(l, u)`` and the untruncated lower end.

    Returns ``(lower, upper, raw_lower)`` where ``raw_lower = x - b*s`` before
    clipping at zero.
    """
    x, w, r = np.broadcast_arrays(
        np.asarray(x, float), np.asarray(w, float), np.asarray(r, float)
    )
    s = np.sqrt(w / r)
    h_t = np.asarray(dist.t_cdf(r, x / s))
    # H^{-1}(1 - q) = -H^{-1}(q) keeps the upper tail accurate when H(t) -> 0.
    tail = np.maximum(alpha * h_t, _TINY)
    b_trunc = -np.asarray(dist.t_quantile(r, tail))
    b_sym = -np.asarray(dist.t_quantile(r, 0.5 - 0.5 * (1.0 - alpha) * h_t))
    b = np.maximum(b_trunc, b_sym)
    raw_lower = x - b * s
    return np.maximum(0.0, raw_lower), x + b * s, raw_lower


def bayes_normal_ci(d: NormalData, alpha: float) -> Interval:
    """Shortest posterior credible interval of mass ``1 - alpha``.

    The posterior of ``theta`` is a t(r) density centred at ``x`` with scale
    ``s = sqrt(w / r)`` truncated to ``theta >= 0``. Its superlevel sets are
    either symmetric about ``x`` or start at 0, which gives the half-width
    multiplier ``b`` as the larger of the two corresponding t quantiles.
    """
    alpha = check_alpha(alpha)
    lo, hi, raw = bayes_normal_bounds(d.x, d.w, d.r, alpha)
    return Interval(
        float(lo),
        float(hi),
        1.0 - alpha,
        Method.BAYES,
        truncated_lower=bool(raw < 0.0),
    )


def bayes_normal_posterior_pdf(d: NormalData, theta):
    theta = np.asarray(theta, float)
    s = d.s
    dens = np.asarray(dist.t_pdf(d.r, (theta - d.x) / s)) / (s * dist.t_cdf(d.r, d.t))
    return np.where(theta >= 0.0, dens, 0.0)


def im_normal_bounds(x, w, r, alpha: float):
    """Vectorized IM endpoints; returns ``(lower, upper, raw_lower, raw_upper)``."""
    x = np.asarray(x, float)
    half = np.sqrt(np.asarray(w, float)) * np.asarray(
        dist.scaled_t_quantile(r, 1.0 - 0.5 * alpha)
    )
    raw_lower = x - half
    raw_upper = x + half
    return np.maximum(0.0, raw_lower), np.maximum(0.0, raw_upper), raw_lower, raw_upper


def im_normal_ci(d: NormalData, alpha: float) -> Interval:
    """IM two-sided interval ``{theta0 : pl(theta0) > alpha}``.

    Both endpoints are clipped at zero; when both clip the answer is the
    degenerate interval [0, 0].
    """
    alpha = check_alpha(alpha)
    lo, hi, raw_lo, raw_hi = im_normal_bounds(d.x, d.w, d.r, alpha)
    return Interval(
        float(lo),
        float(hi),
        1.0 - alpha,
        Method.IM,
        truncated_lower=bool(raw_lo < 0.0),
        truncated_upper=bool(raw_hi < 0.0),
    )


def im_normal_plausibility(d: NormalData, theta0):
    """Plausibility of the singleton assertion ``theta = theta0``.

    At the boundary ``theta0 = 0`` only the upper tail of the pivot counts
    against the assertion; in the interior both tails do.
    """
    theta0 = np.asarray(theta0, float)
    if np.any(~(theta0 >= 0.0)):
        raise DomainError("theta0 must be nonnegative")
    f = np.asarray(dist.scaled_t_cdf(d.r, (d.x - theta0) / np.sqrt(d.w)))
    boundary = np.where(f > 0.5, 2.0 * (1.0 - f), 1.0)
    interior = np.where(f < 0.5, 2.0 * f, 2.0 * (1.0 - f))
    out = np.where(theta0 == 0.0, boundary, interior)
    return float(out) if out.ndim == 0 else out
