"""Coverage, expected-length and uniformity experiments.

A grid is rectangular: every truth value is crossed with every design value
(``r`` for the normal model, ``m`` for the Poisson model). Each cell draws its
``M`` data replicates from its own substream, keyed by the grid seed and the
cell's coordinates, so a cell gives the same numbers whether it runs alone,
inside a larger grid, or in a worker process.

Monte Carlo intervals (IM, NIM) draw the auxiliary uniforms of the count
equation from a seed keyed by the cell and ``x``, and those of the background
equation from a seed keyed by the cell and ``w``. Replicates that observe the
same pair share one interval, yet the Monte Carlo error still averages over
the many distinct counts seen in a cell, and the per-count work is reused.
"""

from __future__ import annotations

import csv
import enum
import functools
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ._version import __version__
from .empirical import ecdf_grid, ks_uniform_distance
from .errors import DomainError
from .interval import Method, check_alpha
from .normal import bayes_normal_bounds, im_normal_bounds
from .poisson_bayes import PoissonData, PriorSpec, bayes_poisson_ci
from .poisson_im import build_endpoint_sample
from .poisson_nim import build_nim_sample

DESK_REPLICATES = 2_000
DESK_MC_SAMPLES = 2_000
FULL_REPLICATES = 10_000
FULL_MC_SAMPLES = 10_000

CSV_COLUMNS = (
    "model", "method", "level", "theta_or_lambda", "epsilon", "m_or_r",
    "coverage", "expected_length", "mc_stderr", "M", "n", "seed",
    "sigma2", "prior_a", "prior_b", "version",
)

# first spawn-key word: what a substream is used for
_DATA_KEY = 1
_AUX_KEY = 2
_DIAG_KEY = 3


class Model(str, enum.Enum):
    NORMAL = "NORMAL"
    POISSON = "POISSON"


@dataclass(frozen=True)
class ExperimentGrid:
    """One rectangular simulation grid.

    ``nuisance`` is sigma^2 (normal) or epsilon (Poisson); ``design`` holds the
    r values (normal) or m values (Poisson).
    """

    model: Model
    truth: tuple[float, ...]
    design: tuple[float, ...]
    nuisance: float
    levels: tuple[float, ...] = (0.90, 0.95)
    replicates: int = DESK_REPLICATES
    mc_samples: int = DESK_MC_SAMPLES
    seed: int = 0
    methods: tuple[Method, ...] = ()
    prior: PriorSpec = field(default_factory=PriorSpec)

    def __post_init__(self) -> None:
        object.__setattr__(self, "model", Model(self.model))
        object.__setattr__(self, "truth", tuple(float(v) for v in self.truth))
        object.__setattr__(self, "design", tuple(float(v) for v in self.design))
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        methods = tuple(Method(m) for m in self.methods) or _default_methods(self.model)
        object.__setattr__(self, "methods", methods)

    def problems(self) -> list[str]:
        """Every constraint violation, one message per offending cell or field."""
        out = []
        if self.replicates < 1:
            out.append(f"replicates={self.replicates} (need M >= 1)")
        if self.mc_samples < 1:
            out.append(f"mc_samples={self.mc_samples} (need n >= 1)")
        if self.seed < 0:
            out.append(f"seed={self.seed} (need >= 0)")
        if not self.truth:
            out.append("truth grid is empty")
        if not self.design:
            out.append("design grid is empty")
        out += [f"truth={v} (must be finite and >= 0)" for v in self.truth if not 0.0 <= v < math.inf]
        out += [f"level={v} (must lie in (0, 1))" for v in self.levels if not 0.0 < v < 1.0]
        if self.model is Model.NORMAL:
            if not self.nuisance > 0:
                out.append(f"sigma2={self.nuisance} (must be > 0)")
            out += [f"r={v} (must be a positive integer)" for v in self.design if not (v >= 1 and v == int(v))]
            out += [f"method={m.value} (not available for NORMAL)" for m in self.methods if m is Method.NIM]
        else:
            if not self.nuisance >= 0:
                out.append(f"epsilon={self.nuisance} (must be >= 0)")
            out += [f"m={v} (must be > 0)" for v in self.design if not 0.0 < v < math.inf]
        return out

    def validate(self) -> "ExperimentGrid":
        bad = self.problems()
        if bad:
            raise DomainError("invalid experiment grid: " + "; ".join(bad))
        return self

    def cells(self) -> list[tuple[float, float]]:
        return [(d, t) for d in self.design for t in self.truth]


def _default_methods(model: Model) -> tuple[Method, ...]:
    if model is Model.NORMAL:
        return (Method.BAYES, Method.IM)
    return (Method.BAYES, Method.IM, Method.NIM)


@dataclass(frozen=True)
class CoverageRow:
    model: str
    method: str
    level: float
    truth: float
    nuisance: float
    design: float
    coverage: float
    expected_length: float
    mc_stderr: float
    replicates: int
    mc_samples: int
    seed: int
    prior_a: float | None = None
    prior_b: float | None = None

    def record(self) -> dict:
        normal = self.model == Model.NORMAL.value
        return {
            "model": self.model,
            "method": self.method,
            "level": self.level,
            "theta_or_lambda": self.truth,
            "epsilon": None if normal else self.nuisance,
            "m_or_r": self.design,
            "coverage": self.coverage,
            "expected_length": self.expected_length,
            "mc_stderr": self.mc_stderr,
            "M": self.replicates,
            "n": self.mc_samples,
            "seed": self.seed,
            "sigma2": self.nuisance if normal else None,
            "prior_a": self.prior_a,
            "prior_b": self.prior_b,
            "version": __version__,
        }


def _bits(v: float) -> tuple[int, int]:
    u = int(np.float64(v).view(np.uint64))
    return u >> 32, u & 0xFFFFFFFF


def cell_generator(seed: int, purpose: int, design: float, truth: float) -> np.random.Generator:
    """Generator for one cell; keyed by value so grid subsets reproduce."""
    key = (purpose, *_bits(design), *_bits(truth))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=key)))


def aux_seed(seed: int, design: float, truth: float, equation: int, count: int) -> int:
    """Monte Carlo seed for one equation (0 count, 1 background) and observed count."""
    key = (_AUX_KEY, *_bits(design), *_bits(truth), int(equation), int(count))
    return int(np.random.SeedSequence(int(seed), spawn_key=key).generate_state(1)[0])


def _pair_seeds(seed: int, design: float, truth: float, pairs: np.ndarray) -> np.ndarray:
    """``(count seed, background seed)`` per row of ``pairs``."""
    count = {x: aux_seed(seed, design, truth, 0, x) for x in np.unique(pairs[:, 0]).tolist()}
    background = {w: aux_seed(seed, design, truth, 1, w) for w in np.unique(pairs[:, 1]).tolist()}
    return np.array([(count[int(x)], background[int(w)]) for x, w in pairs], dtype=np.int64).reshape(-1, 2)


def _summarize(hits: np.ndarray, lengths: np.ndarray) -> tuple[float, float, float]:
    m = hits.size
    cov = float(np.count_nonzero(hits)) / m
    return cov, float(np.mean(lengths)), math.sqrt(cov * (1.0 - cov) / m)


def _normal_cell(grid: ExperimentGrid, r: float, theta: float) -> list[CoverageRow]:
    gen = cell_generator(grid.seed, _DATA_KEY, r, theta)
    sigma = math.sqrt(grid.nuisance)
    x = theta + sigma * gen.standard_normal(grid.replicates)
    w = grid.nuisance * gen.chisquare(r, grid.replicates)
    rows = []
    for level in grid.levels:
        alpha = 1.0 - level
        for method in grid.methods:
            if method is Method.BAYES:
                lo, hi, _ = bayes_normal_bounds(x, w, r, alpha)
            else:
                lo, hi, _, _ = im_normal_bounds(x, w, r, alpha)
            hits = (lo <= theta) & (theta <= hi)
            cov, length, se = _summarize(hits, hi - lo)
            rows.append(CoverageRow(
                Model.NORMAL.value, method.value, level, theta, grid.nuisance, r,
                cov, length, se, grid.replicates, 0, grid.seed,
            ))
    return rows


@functools.lru_cache(maxsize=1 << 17)
def _bayes_bounds(x: int, w: int, m: float, a: float, b: float, alpha: float) -> tuple[float, float]:
    ci = bayes_poisson_ci(PoissonData(x, w, m), PriorSpec(a, b), alpha)
    return ci.lower, ci.upper


def poisson_interval_table(
    pairs: np.ndarray, m: float, method: Method, alphas: tuple[float, ...],
    n: int, aux_seeds: np.ndarray, prior: PriorSpec,
) -> np.ndarray:
    """Interval endpoints for each distinct ``(x, w)`` row of ``pairs``.

    Returns an array shaped ``(len(pairs), len(alphas), 2)``.
    """
    out = np.empty((len(pairs), len(alphas), 2))
    for i, (x, w) in enumerate(pairs):
        d = PoissonData(int(x), int(w), m)
        if method is Method.BAYES:
            for j, a in enumerate(alphas):
                out[i, j] = _bayes_bounds(d.x, d.w, float(m), prior.a, prior.b, a)
            continue
        build = build_endpoint_sample if method is Method.IM else build_nim_sample
        sample = build(d, n, int(aux_seeds[i, 0]), int(aux_seeds[i, 1]))
        for j, a in enumerate(alphas):
            ci = sample.interval(a)
            out[i, j] = ci.lower, ci.upper
    return out


def _poisson_cell(grid: ExperimentGrid, m: float, lam: float) -> list[CoverageRow]:
    gen = cell_generator(grid.seed, _DATA_KEY, m, lam)
    eps = grid.nuisance
    x = gen.poisson(eps + lam, grid.replicates)
    w = gen.poisson(m * eps, grid.replicates)
    pairs, inverse = np.unique(np.column_stack([x, w]), axis=0, return_inverse=True)
    inverse = np.ravel(inverse)
    alphas = tuple(check_alpha(1.0 - lv) for lv in grid.levels)
    aux = _pair_seeds(grid.seed, m, lam, pairs)
    rows = []
    for method in grid.methods:
        table = poisson_interval_table(pairs, m, method, alphas, grid.mc_samples, aux, grid.prior)
        mc = 0 if method is Method.BAYES else grid.mc_samples
        for j, level in enumerate(grid.levels):
            lo = table[inverse, j, 0]
            hi = table[inverse, j, 1]
            hits = (lo <= lam) & (lam <= hi)
            cov, length, se = _summarize(hits, hi - lo)
            rows.append(CoverageRow(
                Model.POISSON.value, method.value, level, lam, eps, m,
                cov, length, se, grid.replicates, mc, grid.seed,
                grid.prior.a if method is Method.BAYES else None,
                grid.prior.b if method is Method.BAYES else None,
            ))
    return rows


def _run_cell(args) -> list[CoverageRow]:
    grid, design, truth = args
    if grid.model is Model.NORMAL:
        return _normal_cell(grid, design, truth)
    return _poisson_cell(grid, design, truth)


def _order(rows: list[CoverageRow]) -> list[CoverageRow]:
    return sorted(rows, key=lambda r: (r.design, r.method, r.level, r.truth))


def _run(grid: ExperimentGrid, jobs: int) -> list[CoverageRow]:
    work = [(grid, d, t) for d, t in grid.cells()]
    if jobs <= 1 or len(work) == 1:
        parts = map(_run_cell, work)
        return _order([row for part in parts for row in part])
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_run_cell, work))
    return _order([row for part in parts for row in part])


def run_normal_coverage(grid: ExperimentGrid, jobs: int = 1) -> list[CoverageRow]:
    """Coverage and mean width of the Bayes and IM normal-mean intervals.

    Rows are sorted by (r, method, level, theta); output does not depend on
    ``jobs``.
    """
    grid.validate()
    if grid.model is not Model.NORMAL:
        raise DomainError("run_normal_coverage needs a NORMAL grid")
    return _run(grid, jobs)


def run_poisson_coverage(grid: ExperimentGrid, jobs: int = 1) -> list[CoverageRow]:
    """Coverage of the true signal rate for Bayes, IM and NIM intervals.

    Membership is closed, so the boundary truth ``lam = 0`` counts as covered
    by any interval starting at 0.
    """
    grid.validate()
    if grid.model is not Model.POISSON:
        raise DomainError("run_poisson_coverage needs a POISSON grid")
    return _run(grid, jobs)


def run_coverage(grid: ExperimentGrid, jobs: int = 1) -> list[CoverageRow]:
    if grid.model is Model.NORMAL:
        return run_normal_coverage(grid, jobs)
    return run_poisson_coverage(grid, jobs)


@dataclass(frozen=True)
class UniformityResult:
    ks_distance: float
    ecdf: np.ndarray
    rejection: dict
    values: np.ndarray = field(repr=False)
    samples: int
    n: int
    seed: int


def uniformity_diagnostic(
    lam: float, epsilon: float, m: float, samples: int = 10_000,
    n: int = DESK_MC_SAMPLES, seed: int = 0, alphas: tuple[float, ...] = (0.05, 0.10),
) -> UniformityResult:
    """Distribution of the NIM cdf evaluated at the true rate.

    Draws ``samples`` fresh ``(x, w)`` pairs at ``(lam, epsilon, m)``, evaluates
    the empirical NIM cdf at ``lam`` for each, and reports its KS distance to
    Unif(0, 1), its ecdf on [0, 1], and the frequency of ``pl(lam) <= alpha``.
    """
    if samples < 100:
        raise DomainError("samples must be >= 100")
    if not lam >= 0 or not epsilon >= 0 or not m > 0 or n < 1:
        raise DomainError("need lam >= 0, epsilon >= 0, m > 0 and n >= 1")
    gen = cell_generator(seed, _DIAG_KEY, m, lam)
    x = gen.poisson(epsilon + lam, samples)
    w = gen.poisson(m * epsilon, samples)
    pairs, inverse = np.unique(np.column_stack([x, w]), axis=0, return_inverse=True)
    inverse = np.ravel(inverse)
    seeds = _pair_seeds(seed, m, lam, pairs)
    h = np.empty(len(pairs))
    pl = np.empty(len(pairs))
    for i, (xi, wi) in enumerate(pairs):
        s = build_nim_sample(PoissonData(int(xi), int(wi), m), n, int(seeds[i, 0]), int(seeds[i, 1]))
        h[i] = s.cdf(lam)
        pl[i] = s.plausibility(lam)
    values = h[inverse]
    plaus = pl[inverse]
    rejection = {float(a): float(np.mean(plaus <= a)) for a in alphas}
    return UniformityResult(
        ks_uniform_distance(values), ecdf_grid(values), rejection, values, samples, n, seed
    )


# grid files -----------------------------------------------------------------

_GRID_KEYS = {
    "model", "truth", "design", "r", "m", "nuisance", "sigma2", "epsilon", "levels",
    "replicates", "mc_samples", "seed", "methods", "prior_a", "prior_b",
}


def _parse_values(text: str) -> list[float]:
    """Comma list or ``start:stop:step`` range (inclusive)."""
    text = text.strip()
    if ":" in text:
        start, stop, step = (float(p) for p in text.split(":"))
        if not step > 0 or stop < start:
            raise ValueError(f"bad range {text!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    return [float(p) for p in text.split(",") if p.strip()]


def parse_grid_text(text: str, seed: int | None = None) -> ExperimentGrid:
    """Build a grid from flat ``key = value`` lines (``#`` starts a comment).

    ``seed`` overrides a seed given in the text.
    """
    raw: dict[str, str] = {}
    errors = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected key = value")
            continue
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.lower()
        if key not in _GRID_KEYS:
            errors.append(f"line {lineno}: unknown key {key!r}")
        elif key in raw:
            errors.append(f"line {lineno}: duplicate key {key!r}")
        else:
            raw[key] = value
    if errors:
        raise DomainError("malformed grid file: " + "; ".join(errors))
    try:
        model = Model(raw.get("model", "").upper())
    except ValueError:
        raise DomainError("malformed grid file: model must be NORMAL or POISSON") from None
    normal = model is Model.NORMAL
    design_key = "r" if normal else "m"
    nuisance_key = "sigma2" if normal else "epsilon"
    try:
        kwargs = dict(
            model=model,
            truth=_parse_values(raw["truth"]),
            design=_parse_values(raw.get(design_key, raw.get("design", ""))),
            nuisance=float(raw.get(nuisance_key, raw.get("nuisance", "1.0" if normal else "3.0"))),
            levels=_parse_values(raw.get("levels", "0.90,0.95")),
            replicates=int(raw.get("replicates", DESK_REPLICATES)),
            mc_samples=int(raw.get("mc_samples", DESK_MC_SAMPLES)),
            seed=int(raw.get("seed", 0)) if seed is None else int(seed),
            methods=tuple(Method(s.strip().upper()) for s in raw.get("methods", "").split(",") if s.strip()),
            prior=PriorSpec(float(raw.get("prior_a", 1.0)), float(raw.get("prior_b", PriorSpec().b))),
        )
    except KeyError as exc:
        raise DomainError(f"malformed grid file: missing key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise DomainError(f"malformed grid file: {exc}") from None
    return ExperimentGrid(**kwargs).validate()


def grid_has_seed(text: str) -> bool:
    return any(line.split("#", 1)[0].split("=", 1)[0].strip().lower() == "seed"
               for line in text.splitlines() if "=" in line.split("#", 1)[0])


# output -------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def rows_to_csv(rows: list[CoverageRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        rec = row.record()
        writer.writerow([_fmt(rec[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def rows_to_json(rows: list[CoverageRow]) -> str:
    recs = []
    for row in rows:
        rec = row.record()
        recs.append({c: (round(v, 6) if isinstance(v, float) else v) for c, v in rec.items()})
    return json.dumps(recs, indent=2, sort_keys=False) + "\n"


def grid_as_dict(grid: ExperimentGrid) -> dict:
    out = asdict(grid)
    out["model"] = grid.model.value
    out["methods"] = [m.value for m in grid.methods]
    return out
