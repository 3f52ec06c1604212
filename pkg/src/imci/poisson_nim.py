"""Nonrandomized IM (NIM) interval for the Poisson signal rate.

The discrete association ``F(x - 1) <= U <= F(x)`` is replaced by the exact
equation ``J(param) = U`` with a randomly weighted Poisson cdf

    J(param) = omega * F_mu(count - 1) + (1 - omega) * F_mu(count),
    mu = scale * param,

(``F_mu(-1)`` read as the indicator of ``mu = 0``). ``J`` decreases strictly on
``(0, inf)``; its generalized inverse ``sup{param : J(param) >= U}`` is found
by bisection. One draw of the signal rate is ``max(0, theta - eps)`` with
``theta`` solving the count equation and ``eps`` the background equation.
"""

from __future__ import annotations

import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence

import numpy as np
from scipy import special

from . import dist
from .empirical import empirical_cdf, empirical_quantile
from .errors import DomainError
from .interval import Interval, Method, check_alpha
from .poisson_bayes import PoissonData
from .poisson_im import BACKGROUND_STREAM, COUNT_STREAM, DEFAULT_MC_SAMPLES

BATCH_ITERATIONS = 64
SERIAL_XTOL = 1e-10


@dataclass(frozen=True)
class WeightedCdfProblem:
    count: int
    weight: float
    target: float
    scale: float = 1.0

    def __post_init__(self) -> None:
        if int(self.count) != self.count or self.count < 0:
            raise DomainError("count must be a nonnegative integer")
        if not 0.0 <= self.weight <= 1.0:
            raise DomainError("weight must lie in [0, 1]")
        if not 0.0 <= self.target <= 1.0:
            raise DomainError("target must lie in [0, 1]")
        if not self.scale > 0:
            raise DomainError("scale must be positive")


def _cdf_at_mean(p: WeightedCdfProblem, mu: float) -> float:
    if p.count == 0:
        return p.weight * (mu == 0.0) + (1.0 - p.weight) * dist.poisson_cdf(mu, 0)
    return p.weight * dist.poisson_cdf(mu, p.count - 1) + (1.0 - p.weight) * dist.poisson_cdf(mu, p.count)


def weighted_cdf(p: WeightedCdfProblem, param: float) -> float:
    if not param >= 0:
        raise DomainError("param must be nonnegative")
    return _cdf_at_mean(p, p.scale * param)


def _initial_upper(count) -> np.ndarray | float:
    return count + 10.0 * np.sqrt(count + 1.0) + 10.0


def solve_weighted(p: WeightedCdfProblem) -> float:
    """Serial bisection for ``sup{param : J(param) >= target}``.

    Bisects on the Poisson mean ``mu = scale * param``, keeping
    ``J(lo) >= target > J(hi)``, until the bracket is narrower than 1e-10.
    The slope of ``J`` in ``mu`` is a Poisson pmf, at most 1, so the
    residual is then below 1e-10 whatever ``scale`` is. When ``count = 0``
    and ``target >= 1 - weight`` the supremum is 0.
    """
    if not 0.0 < p.target < 1.0:
        raise DomainError("target must lie strictly inside (0, 1)")
    lo = 0.0
    hi = _initial_upper(p.count)
    while _cdf_at_mean(p, hi) >= p.target:
        hi *= 2.0
    while hi - lo > SERIAL_XTOL:
        mid = 0.5 * (lo + hi)
        if _cdf_at_mean(p, mid) >= p.target:
            lo = mid
        else:
            hi = mid
    return lo / p.scale


def _weighted_cdf_mu(count: np.ndarray, weight: np.ndarray, mu: np.ndarray) -> np.ndarray:
    # omega F(c-1) + (1-omega) F(c) = F(c-1) + (1-omega) pmf(c)
    below = np.where(count >= 1.0, special.pdtr(np.maximum(count - 1.0, 0.0), mu), weight * (mu == 0.0))
    pmf = np.exp(special.xlogy(count, mu) - mu - special.gammaln(count + 1.0))
    return below + (1.0 - weight) * pmf


def _solve_chunk(count, weight, target, scale) -> np.ndarray:
    lo = np.zeros_like(target)
    hi = _initial_upper(count)
    for _ in range(200):
        short = _weighted_cdf_mu(count, weight, hi) >= target
        if not short.any():
            break
        hi = np.where(short, 2.0 * hi, hi)
    for _ in range(BATCH_ITERATIONS):
        mid = 0.5 * (lo + hi)
        keep = _weighted_cdf_mu(count, weight, mid) >= target
        lo = np.where(keep, mid, lo)
        hi = np.where(keep, hi, mid)
    return lo / scale


def solve_weighted_arrays(count, weight, target, scale=1.0, jobs: int = 1) -> np.ndarray:
    """Lock-step bisection over arrays of problems.

    Runs a fixed number of halvings for every element, so results do not
    depend on how the batch is split across ``jobs`` threads.
    """
    count, weight, target, scale = (
        np.asarray(v, dtype=float).ravel()
        for v in np.broadcast_arrays(count, weight, target, scale)
    )
    bad = np.flatnonzero(
        ~((target > 0.0) & (target < 1.0))
        | ~((weight >= 0.0) & (weight <= 1.0))
        | ~(scale > 0.0)
        | ~((count >= 0.0) & (count == np.floor(count)))
    )
    if bad.size:
        shown = ", ".join(str(i) for i in bad[:10])
        raise DomainError(f"invalid weighted-cdf problems at indices [{shown}] ({bad.size} total)")
    if jobs <= 1 or target.size < 2 * jobs:
        return _solve_chunk(count, weight, target, scale)
    bounds = np.linspace(0, target.size, jobs + 1).astype(int)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        parts = pool.map(
            lambda ij: _solve_chunk(*(v[ij[0]:ij[1]] for v in (count, weight, target, scale))),
            zip(bounds[:-1], bounds[1:]),
        )
        return np.concatenate(list(parts))


def batch_solve(problems: Sequence[WeightedCdfProblem], jobs: int = 1) -> np.ndarray:
    if not problems:
        return np.zeros(0)
    cols = np.array([(p.count, p.weight, p.target, p.scale) for p in problems], dtype=float)
    return solve_weighted_arrays(cols[:, 0], cols[:, 1], cols[:, 2], cols[:, 3], jobs=jobs)


@dataclass(frozen=True, eq=False)
class NimSample:
    draws: np.ndarray
    n: int
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "_sorted", np.sort(self.draws))

    def cdf(self, t):
        return empirical_cdf(self._sorted, t)

    def interval(self, alpha: float) -> Interval:
        alpha = check_alpha(alpha)
        lo = max(0.0, empirical_quantile(self._sorted, alpha / 2))
        hi = max(0.0, empirical_quantile(self._sorted, 1 - alpha / 2))
        return Interval(lo, hi, 1 - alpha, Method.NIM, truncated_lower=lo == 0.0, truncated_upper=hi == 0.0)

    def plausibility(self, lambda0):
        lambda0 = np.asarray(lambda0, dtype=float)
        if np.any(~(lambda0 >= 0.0)):
            raise DomainError("lambda0 must be nonnegative")
        h = np.asarray(self.cdf(lambda0))
        boundary = np.where(h < 0.5, 2.0 * h, 1.0)
        interior = np.where(h < 0.5, 2.0 * h, 2.0 * (1.0 - h))
        out = np.where(lambda0 == 0.0, boundary, interior)
        return float(out) if out.ndim == 0 else out


@functools.lru_cache(maxsize=512)
def _weighted_roots(count: int, n: int, seed: int, stream_id: int) -> np.ndarray:
    """Roots in mean units (scale 1) for ``n`` draws of ``(omega, u)``."""
    stream = dist.RngStream(seed, stream_id)
    omega = stream.uniform01(n)
    u = stream.uniform01(n)
    roots = solve_weighted_arrays(count, omega, u)
    roots.setflags(write=False)
    return roots


def build_nim_sample(
    d: PoissonData, n: int = DEFAULT_MC_SAMPLES, seed: int = 0, background_seed: int | None = None
) -> NimSample:
    """Draw ``n`` values of ``max(0, theta - eps)`` by solving both equations.

    ``(omega, u)`` come from the count substream and ``(omega~, u~)`` from the
    background substream of ``background_seed`` (default: ``seed``). The
    background equation in ``eps`` with ``F_{m eps}`` is solved in mean units
    and divided by ``m``.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    bg_seed = seed if background_seed is None else background_seed
    theta = _weighted_roots(int(d.x), int(n), int(seed), COUNT_STREAM)
    eps = _weighted_roots(int(d.w), int(n), int(bg_seed), BACKGROUND_STREAM) / d.m
    return NimSample(np.maximum(0.0, theta - eps), int(n), int(seed))


def nim_poisson_ci(d: PoissonData, alpha: float, n: int = DEFAULT_MC_SAMPLES, seed: int = 0) -> Interval:
    alpha = check_alpha(alpha)
    return build_nim_sample(d, n, seed).interval(alpha)


def nim_poisson_plausibility(d: PoissonData, lambda0, n: int = DEFAULT_MC_SAMPLES, seed: int = 0):
    return build_nim_sample(d, n, seed).plausibility(lambda0)


def monte_carlo_sample_size(abs_error: float = 0.01, confidence: float = 0.95) -> int:
    """Draws needed so an empirical cdf value is within ``abs_error`` w.p. ``confidence``.

    Worst case (cdf value 1/2) normal approximation.
    """
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    return int(math.ceil((z * 0.5 / abs_error) ** 2))
