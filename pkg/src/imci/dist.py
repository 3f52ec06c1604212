"""Special functions, distribution functions and seeded random streams.

All distribution functions broadcast over numpy arrays. Scalar inputs give
Python floats back, array inputs give arrays.

Quantiles are computed by bracketed bisection on the matching cdf rather than
by a closed-form inverse, so every quantile here round-trips through the cdf
implemented next to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .errors import ConvergenceError, DomainError

QUANTILE_RTOL = 1e-10
QUANTILE_MAXITER = 200

_DISTRIBUTIONS = ("uniform01", "std_normal", "chi_square", "poisson")


def _as_output(value):
    if np.ndim(value) == 0:
        return float(value)
    return value


def _check_prob_open(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise DomainError("probability must lie strictly inside (0, 1)")
    return p


def _check_df(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(~(r >= 1.0)):
        raise DomainError("degrees of freedom must be >= 1")
    return r


def invert_increasing(
    cdf: Callable[[np.ndarray], np.ndarray],
    p: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    *,
    expand_lo: bool = False,
    geometric: bool = False,
    atol: float = 0.0,
    rtol: float = QUANTILE_RTOL,
    maxiter: int = QUANTILE_MAXITER,
) -> np.ndarray:
    """Solve ``cdf(q) = p`` element-wise by lock-step bisection.

    ``cdf`` must be nondecreasing and accept arrays shaped like ``p``. The
    bracket ``[lo, hi]`` is widened by doubling until it straddles ``p``;
    ``lo`` only moves when ``expand_lo`` is set (supports on the whole real
    line). With ``geometric`` set, brackets with ``lo > 0`` are split at
    ``sqrt(lo * hi)``, which reaches tiny positive roots in few steps.
    Iteration stops once every bracket is narrower than
    ``atol + rtol * |q|`` or after ``maxiter`` halvings.
    """
    p = np.asarray(p, dtype=float)
    lo = np.array(np.broadcast_to(lo, p.shape), dtype=float)
    hi = np.array(np.broadcast_to(hi, p.shape), dtype=float)

    for _ in range(maxiter):
        short = cdf(hi) < p
        if not short.any():
            break
        step = hi - lo
        hi = np.where(short, hi + 2.0 * step, hi)
    else:
        raise ConvergenceError("could not bracket quantile from above")
    if expand_lo:
        for _ in range(maxiter):
            over = cdf(lo) >= p
            if not over.any():
                break
            step = hi - lo
            lo = np.where(over, lo - 2.0 * step, lo)
        else:
            raise ConvergenceError("could not bracket quantile from below")

    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if geometric:
            mid = np.where(lo > 0.0, np.sqrt(lo * hi), mid)
        below = cdf(mid) < p
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        width = hi - lo
        if np.all(width <= atol + rtol * np.maximum(np.abs(lo), np.abs(hi))):
            break
    return 0.5 * (lo + hi)


def log_gamma(z):
    """Natural log of the gamma function for ``z > 0``."""
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0.0)):
        raise DomainError("log_gamma requires z > 0")
    return _as_output(special.gammaln(z))


def gamma_cdf(shape, x):
    """Regularized lower incomplete gamma ``P(shape, x)`` (unit scale).

    ``shape = 0`` is read as a point mass at zero, so the cdf is 1 on
    ``x >= 0``.
    """
    shape = np.asarray(shape, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(~(shape >= 0.0)) or np.any(~(x >= 0.0)):
        raise DomainError("gamma_cdf requires shape >= 0 and x >= 0")
    safe = np.where(shape > 0.0, shape, 1.0)
    out = np.where(shape > 0.0, special.gammainc(safe, x), 1.0)
    return _as_output(out)


def _gamma_cdf_unchecked(shape: np.ndarray, x: np.ndarray) -> np.ndarray:
    return special.gammainc(shape, np.maximum(x, 0.0))


def gamma_quantile(shape, p):
    """Inverse of :func:`gamma_cdf` in ``x``; zero for ``shape = 0``."""
    shape = np.asarray(shape, dtype=float)
    p = _check_prob_open(p)
    if np.any(~(shape >= 0.0)):
        raise DomainError("gamma_quantile requires shape >= 0")
    shape, p = np.broadcast_arrays(shape, p)
    positive = shape > 0.0
    out = np.zeros(shape.shape)
    if positive.any():
        a = shape[positive]
        q = p[positive]
        hi = a + 10.0 * np.sqrt(a) + 10.0
        # P(a, x) <= x^a / Gamma(a + 1), so this point never overshoots q
        lo = np.exp((np.log(q) + special.gammaln(a + 1.0)) / a)
        lo = np.clip(lo, np.finfo(float).tiny, hi)
        out[positive] = invert_increasing(
            lambda t: _gamma_cdf_unchecked(a, t), q, lo, hi, geometric=True
        )
    return _as_output(out)


def poisson_cdf(theta, x):
    """P(N <= x) for N ~ Poisson(theta); zero for negative ``x``."""
    theta = np.asarray(theta, dtype=float)
    x = np.floor(np.asarray(x, dtype=float))
    if np.any(~(theta >= 0.0)):
        raise DomainError("poisson_cdf requires theta >= 0")
    out = np.where(x >= 0.0, special.pdtr(np.maximum(x, 0.0), theta), 0.0)
    return _as_output(out)


def poisson_pmf(theta, x):
    """P(N = x) for N ~ Poisson(theta)."""
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(~(theta >= 0.0)):
        raise DomainError("poisson_pmf requires theta >= 0")
    k = np.maximum(x, 0.0)
    logp = special.xlogy(k, theta) - theta - special.gammaln(k + 1.0)
    out = np.where((x >= 0.0) & (x == np.floor(x)), np.exp(logp), 0.0)
    return _as_output(out)


def t_cdf(r, t):
    """Student-t cdf with ``r`` degrees of freedom."""
    r = _check_df(r)
    return _as_output(special.stdtr(r, np.asarray(t, dtype=float)))


def t_pdf(r, t):
    r = _check_df(r)
    t = np.asarray(t, dtype=float)
    logd = (
        special.gammaln(0.5 * (r + 1.0))
        - special.gammaln(0.5 * r)
        - 0.5 * np.log(r * math.pi)
        - 0.5 * (r + 1.0) * np.log1p(t * t / r)
    )
    return _as_output(np.exp(logd))


def t_quantile(r, p):
    """Inverse Student-t cdf by bisection, accurate to ~1e-10 relative."""
    r = _check_df(r)
    p = _check_prob_open(p)
    r, p = np.broadcast_arrays(r, p)
    out = invert_increasing(
        lambda t: special.stdtr(r, t),
        p,
        np.full(p.shape, -10.0),
        np.full(p.shape, 10.0),
        expand_lo=True,
        atol=1e-14,
    )
    return _as_output(out)


def scaled_t_cdf(r, v):
    """Cdf of Z / sqrt(U) for Z ~ N(0, 1), U ~ chi-square(r) independent.

    Since Z / sqrt(U) equals a t(r) variate divided by sqrt(r), this is
    ``t_cdf(r, v * sqrt(r))``.
    """
    r = _check_df(r)
    return t_cdf(r, np.asarray(v, dtype=float) * np.sqrt(r))


def scaled_t_quantile(r, p):
    r = _check_df(r)
    return _as_output(np.asarray(t_quantile(r, p)) / np.sqrt(r))


@dataclass
class RngStream:
    """A reproducible random substream.

    ``(seed, stream_id)`` fully determines the draw sequence; distinct
    ``stream_id`` values under one seed give independent substreams
    (Philox counter-based generator keyed through ``SeedSequence``).
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.seed < 0 or self.stream_id < 0:
            raise DomainError("seed and stream_id must be nonnegative")
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        self._gen = np.random.Generator(np.random.Philox(ss))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform01(self, size=None):
        """Uniform draws strictly inside (0, 1) on a 2**-53 lattice."""
        k = self._gen.integers(0, 2**53, size=size, dtype=np.int64)
        return (k + 0.5) / 2.0**53

    def spawn(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


def sample(stream: RngStream, dist: str, param: float | None = None, size=None):
    """Draw from one of the supported families.

    ``dist`` is one of ``uniform01``, ``std_normal``, ``chi_square`` (``param``
    = degrees of freedom) or ``poisson`` (``param`` = mean). Returns a float
    when ``size`` is None, otherwise an array.
    """
    if dist not in _DISTRIBUTIONS:
        raise DomainError(f"unknown distribution {dist!r}")
    gen = stream.generator
    if dist == "uniform01":
        out = stream.uniform01(size)
    elif dist == "std_normal":
        out = gen.standard_normal(size)
    elif dist == "chi_square":
        if param is None or not param > 0:
            raise DomainError("chi_square needs positive degrees of freedom")
        out = gen.chisquare(param, size)
    else:
        if param is None or not param >= 0:
            raise DomainError("poisson needs a nonnegative mean")
        out = gen.poisson(param, size)
    if size is None:
        return float(out)
    return np.asarray(out, dtype=float)
