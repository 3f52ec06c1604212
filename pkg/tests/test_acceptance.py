"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a ``criterion N: PASS|FAIL ...`` line that the terminal
summary prints under "acceptance criteria". Run this file directly for the
same report without the rest of the suite.
"""

import math
import sys
import time

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE_LINES
from imci import dist
from imci.interval import Method
from imci.normal import NormalData, bayes_normal_ci, im_normal_ci, im_normal_plausibility
from imci.poisson_bayes import PoissonData, PriorSpec, bayes_poisson_ci
from imci.poisson_im import build_endpoint_sample, sample_endpoint_pair
from imci.poisson_nim import (
    WeightedCdfProblem,
    build_nim_sample,
    solve_weighted,
    solve_weighted_arrays,
    weighted_cdf,
)
from imci.sim import ExperimentGrid, Model, rows_to_csv, run_coverage, uniformity_diagnostic

pytestmark = pytest.mark.acceptance


def report(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def test_criterion_1_zero_count_bayes_anchor():
    worst = 0.0
    for m in (20.0, 50.0, 100.0, 300.0):
        for w in (10, 20, 30, 40):
            for alpha, upper in ((0.10, 2.3026), (0.05, 2.9957)):
                ci = bayes_poisson_ci(PoissonData(0, w, m), PriorSpec(1.0, 0.0), alpha)
                worst = max(worst, abs(ci.lower), abs(ci.upper - upper))
    ok = worst <= 1e-3
    report(1, ok, f"max endpoint deviation {worst:.2e} (tol 1e-3) over 32 intervals")
    assert ok


# (x, w) -> {(method, alpha): published upper endpoint}; every published lower endpoint is 0.00
PUBLISHED_POISSON = {
    (0, 10): {("IM", 0.10): 2.50, ("NIM", 0.10): 1.78, ("IM", 0.05): 3.19, ("NIM", 0.05): 2.49},
    (0, 20): {("IM", 0.10): 2.02, ("NIM", 0.10): 1.29, ("IM", 0.05): 2.72, ("NIM", 0.05): 1.96},
    (0, 30): {("IM", 0.10): 1.53, ("NIM", 0.10): 0.80, ("IM", 0.05): 2.23, ("NIM", 0.05): 1.47},
    (0, 40): {("IM", 0.10): 1.05, ("NIM", 0.10): 0.31, ("IM", 0.05): 1.73, ("NIM", 0.05): 0.98},
    (1, 40): {("IM", 0.10): 2.78, ("NIM", 0.10): 2.14, ("IM", 0.05): 3.61, ("NIM", 0.05): 2.93},
}


def test_criterion_2_monte_carlo_interval_anchors():
    start = time.perf_counter()
    worst, where = 0.0, None
    for (x, w), expected in PUBLISHED_POISSON.items():
        d = PoissonData(x, w, 20.0)
        samples = {"IM": build_endpoint_sample(d, 100_000, 2024), "NIM": build_nim_sample(d, 100_000, 2024)}
        for (method, alpha), upper in expected.items():
            ci = samples[method].interval(alpha)
            dev = max(abs(ci.lower - 0.0), abs(ci.upper - upper))
            if dev >= worst:
                worst, where = dev, (method, x, w, alpha, round(ci.upper, 3))
    elapsed = time.perf_counter() - start
    ok = worst <= 0.06 and elapsed < 300
    report(2, ok, f"max deviation {worst:.3f} (tol 0.06) at {where}; {elapsed:.0f}s")
    assert ok


PUBLISHED_NORMAL = {
    (0.01, 5): {0.10: (0.3599, 0.5401), 0.05: (0.3351, 0.5649)},
    (0.10, 5): {0.10: (0.1766, 0.7234), 0.05: (0.1106, 0.7894)},
    (1.0, 10): {0.10: (0.0000, 0.9042), 0.05: (0.0000, 1.0419)},
    (1.0, 50): {0.10: (0.2138, 0.6862), 0.05: (0.1675, 0.7325)},
}


def test_criterion_3_normal_bayes_anchors():
    vs_pub = vs_oracle = 0.0
    for (w, r), levels in PUBLISHED_NORMAL.items():
        for alpha, (lo, hi) in levels.items():
            ci = bayes_normal_ci(NormalData(0.45, w, r), alpha)
            q_lo, q_hi = oracles.normal_bayes_equal_density(0.45, w, r, alpha)
            vs_pub = max(vs_pub, abs(ci.lower - lo), abs(ci.upper - hi))
            vs_oracle = max(vs_oracle, abs(ci.lower - q_lo), abs(ci.upper - q_hi))
    ok = vs_pub <= 0.02 and vs_oracle <= 0.005
    report(3, ok, f"max deviation {vs_pub:.1e} from published (tol 0.02), {vs_oracle:.1e} from quadrature (tol 0.005)")
    assert ok


def test_criterion_4_normal_im_exactness():
    grid = ExperimentGrid(Model.NORMAL, truth=(0.0, 1.0, 4.0), design=(5.0, 20.0), nuisance=1.0,
                          replicates=5000, seed=11, methods=(Method.IM,))
    misses = []
    for row in run_coverage(grid):
        alpha = 1.0 - row.level
        band = 3.0 * math.sqrt(alpha * (1.0 - alpha) / row.replicates)
        if abs(row.coverage - row.level) > band:
            exact = oracles.normal_im_coverage(row.truth, int(row.design), alpha)
            misses.append(f"theta={row.truth:g} r={row.design:g} level={row.level:g} "
                          f"cov={row.coverage:.4f} (exact {exact:.4f})")
    ok = not misses
    detail = "all 12 cells within nominal +- 3 se" if ok else f"{len(misses)}/12 cells outside band: " + "; ".join(misses)
    report(4, ok, detail)
    assert ok


def test_criterion_5_poisson_im_conservative():
    start = time.perf_counter()
    grid = ExperimentGrid(Model.POISSON, truth=(0.0, 1.0, 5.0), design=(20.0, 100.0), nuisance=3.0,
                          replicates=2000, mc_samples=2000, seed=5, methods=(Method.IM,))
    rows = run_coverage(grid)
    slack = min(r.coverage - (r.level - 3.0 * r.mc_stderr) for r in rows)
    lowest = min(rows, key=lambda r: r.coverage - r.level)
    elapsed = time.perf_counter() - start
    ok = slack >= 0.0 and elapsed < 600
    report(5, ok, f"min coverage - (nominal - 3 se) = {slack:+.4f}; closest cell lambda={lowest.truth:g} "
                  f"m={lowest.design:g} level={lowest.level:g} cov={lowest.coverage:.4f}; {elapsed:.0f}s")
    assert ok


def test_criterion_6_nim_near_nominal():
    start = time.perf_counter()
    grid = ExperimentGrid(Model.POISSON, truth=(1.0,), design=(20.0,), nuisance=3.0, levels=(0.90,),
                          replicates=10_000, mc_samples=2000, seed=0, methods=(Method.NIM,))
    row = run_coverage(grid)[0]
    elapsed = time.perf_counter() - start
    ok = abs(row.coverage - 0.91) <= 0.015 and elapsed < 900
    report(6, ok, f"coverage {row.coverage:.4f} (target 0.91 +- 0.015, se {row.mc_stderr:.4f}); {elapsed:.0f}s")
    assert ok


def test_criterion_7_bayes_undercoverage():
    normal = ExperimentGrid(Model.NORMAL, truth=tuple(np.round(np.arange(0.0, 4.01, 0.1), 10)), design=(5.0,),
                            nuisance=1.0, levels=(0.90,), replicates=5000, seed=7, methods=(Method.BAYES,))
    poisson = ExperimentGrid(Model.POISSON, truth=tuple(np.round(np.arange(0.0, 10.01, 0.25), 10)), design=(300.0,),
                             nuisance=3.0, levels=(0.90,), replicates=5000, seed=7, methods=(Method.BAYES,))
    found = {}
    for name, grid in (("normal r=5", normal), ("poisson m=300", poisson)):
        rows = run_coverage(grid)
        worst = min(rows, key=lambda r: r.coverage + 3.0 * r.mc_stderr)
        found[name] = (worst.coverage + 3.0 * worst.mc_stderr < 0.90, worst)
    ok = all(hit for hit, _ in found.values())
    detail = "; ".join(
        f"{name}: min {row.coverage:.4f} at {row.truth:g} (se {row.mc_stderr:.4f})" for name, (_, row) in found.items()
    )
    report(7, ok, detail)
    assert ok


def test_criterion_8_nim_uniformity():
    start = time.perf_counter()
    parts, ok = [], True
    for lam in (0.0, 1.0, 4.0):
        res = uniformity_diagnostic(lam, 3.0, 20.0, samples=10_000, n=2000, seed=13)
        ok &= res.ks_distance < 0.05
        parts.append(f"lambda={lam:g}: KS {res.ks_distance:.4f}")
    elapsed = time.perf_counter() - start
    report(8, ok, "; ".join(parts) + f" (tol 0.05); {elapsed:.0f}s")
    assert ok


def _property_checks() -> dict[str, float | bool]:
    gen = np.random.default_rng(99)
    out = {}

    shapes = gen.uniform(0.05, 300.0, 300)
    probs = gen.uniform(1e-6, 1 - 1e-6, 300)
    dfs = gen.integers(1, 200, 300)
    out["gamma round trip"] = max(abs(dist.gamma_cdf(a, dist.gamma_quantile(a, p)) - p) for a, p in zip(shapes, probs))
    out["t round trip"] = max(abs(dist.t_cdf(r, dist.t_quantile(r, p)) - p) for r, p in zip(dfs, probs))

    counts = gen.integers(1, 200, 300)
    thetas = gen.uniform(1e-6, 60.0, 300)
    out["poisson-gamma duality"] = max(
        abs(dist.gamma_cdf(x, t) - (1.0 - dist.poisson_cdf(t, x - 1))) for x, t in zip(counts, thetas)
    )

    probs_w = [WeightedCdfProblem(int(c), float(w), float(u), float(s)) for c, w, u, s in zip(
        gen.integers(0, 300, 300), gen.uniform(size=300), gen.uniform(1e-6, 1 - 1e-6, 300),
        gen.choice([1.0, 20.0, 300.0], 300))]
    monotone = True
    for p in probs_w[:100]:
        grid = np.sort(gen.uniform(1e-3, 3.0 * (p.count + 5) / p.scale, 40))
        vals = np.array([weighted_cdf(p, t) for t in grid])
        resolvable = (vals[:-1] > 1e-250) & (vals[1:] < 1 - 1e-12)
        monotone &= bool(np.all(vals[:-1][resolvable] > vals[1:][resolvable]))
    out["weighted cdf strictly decreasing"] = monotone

    roots = np.array([solve_weighted(p) for p in probs_w])
    out["root residual"] = max(
        (abs(weighted_cdf(p, r) - p.target) for p, r in zip(probs_w, roots) if r > 0), default=0.0
    )
    cols = np.array([(p.count, p.weight, p.target, p.scale) for p in probs_w])
    out["batch vs serial"] = float(np.max(np.abs(solve_weighted_arrays(*cols.T) - roots)))

    ordered = True
    for x, w, m, u, v in zip(gen.integers(0, 40, 300), gen.integers(0, 200, 300), gen.choice([1.0, 20.0, 300.0], 300),
                             gen.uniform(1e-6, 1 - 1e-6, 300), gen.uniform(1e-6, 1 - 1e-6, 300)):
        lam1, lam2 = sample_endpoint_pair(PoissonData(int(x), int(w), float(m)), u, v)
        ordered &= 0.0 <= lam1 <= lam2
    out["lambda1 <= lambda2"] = ordered

    dual = True
    for x, w, r in zip(gen.uniform(-2, 4, 50), gen.uniform(0.05, 5, 50), gen.integers(1, 50, 50)):
        d = NormalData(float(x), float(w), int(r))
        ci = im_normal_ci(d, 0.10)
        grid = np.linspace(0.0, ci.upper + 2.0, 301)
        pl = im_normal_plausibility(d, grid)
        clear = (np.abs(grid - ci.lower) > 1e-9) & (np.abs(grid - ci.upper) > 1e-9)
        dual &= np.array_equal(((grid > ci.lower) & (grid < ci.upper))[clear], (pl > 0.10)[clear])
    out["plausibility-interval duality"] = dual

    small = ExperimentGrid(Model.POISSON, truth=(0.0, 2.0), design=(20.0,), nuisance=3.0, replicates=200,
                           mc_samples=300, seed=21)
    out["byte-identical reruns"] = rows_to_csv(run_coverage(small)) == rows_to_csv(run_coverage(small))
    return out


def test_criterion_9_property_suites():
    res = _property_checks()
    limits = {"gamma round trip": 1e-8, "t round trip": 1e-8, "poisson-gamma duality": 1e-10,
              "root residual": 1e-8, "batch vs serial": 1e-8}
    failed = [k for k, v in res.items() if (v > limits[k] if k in limits else not v)]
    ok = not failed
    shown = ", ".join(f"{k} {v:.1e}" for k, v in res.items() if k in limits)
    report(9, ok, f"{shown}; boolean checks {'all hold' if ok else 'failed: ' + ', '.join(failed)}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
