"""Command-line front end: ``imci <subcommand> [flags]``.

Exit status is 0 on success, 2 on invalid input and 3 when a root or level
search fails to converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import secrets
import sys
from dataclasses import replace

import numpy as np

from ._version import __version__
from .errors import ConvergenceError, DomainError
from .interval import Interval, Method, check_alpha
from .normal import NormalData, bayes_normal_ci, im_normal_ci, im_normal_plausibility
from .poisson_bayes import PoissonData, PriorSpec, bayes_poisson_ci
from .poisson_im import DEFAULT_MC_SAMPLES, build_endpoint_sample
from .poisson_nim import build_nim_sample
from .sim import (
    FULL_MC_SAMPLES,
    FULL_REPLICATES,
    grid_has_seed,
    parse_grid_text,
    rows_to_csv,
    rows_to_json,
    run_coverage,
    uniformity_diagnostic,
)

SEED_ENV = "IMCI_SEED"

NORMAL_TABLE_X = 0.45
NORMAL_TABLE_W = (0.01, 0.10, 0.50, 1.00, 5.00, 10.00)
NORMAL_TABLE_R = (5, 10, 20, 50)
POISSON_TABLE_X = (0, 1)
POISSON_TABLE_M = (20, 50, 100, 300)
POISSON_TABLE_W = (10, 20, 30, 40)
TABLE_LEVELS = (0.90, 0.95)


class UsageError(DomainError):
    pass


def resolve_seed(seed: int | None) -> tuple[int, str]:
    """Seed from the flag, else from ``IMCI_SEED``, else freshly generated."""
    if seed is not None:
        source = "flag"
    elif os.environ.get(SEED_ENV, "").strip():
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer") from None
        source = "env"
    else:
        seed = secrets.randbelow(2**31)
        source = "generated"
    if seed < 0:
        raise UsageError("seed must be nonnegative")
    return seed, source


def _echo_seed(seed: int, source: str) -> None:
    print(f"# seed={seed} ({source})", file=sys.stderr)


def _methods(arg: str, allowed: tuple[Method, ...]) -> tuple[Method, ...]:
    if arg.lower() == "all":
        return allowed
    out = []
    for part in arg.split(","):
        try:
            m = Method(part.strip().upper())
        except ValueError:
            raise UsageError(f"unknown method {part!r}") from None
        if m not in allowed:
            raise UsageError(f"method {m.value} is not available here")
        out.append(m)
    return tuple(out)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _records_out(records: list[dict], fmt: str, out: str | None, header: list[str] | None = None) -> None:
    if fmt == "json":
        _emit(json.dumps(records, indent=2) + "\n", out)
        return
    cols = header or list(records[0])
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    writer.writeheader()
    writer.writerows(records)
    _emit(buf.getvalue(), out)


def _interval_record(ci: Interval, digits: int, **inputs) -> dict:
    rec = {"method": ci.method.value, **inputs, "level": round(ci.level, 6)}
    rec.update(
        lower=round(ci.lower, digits),
        upper=round(ci.upper, digits),
        width=round(ci.width, digits),
        truncated_lower=ci.truncated_lower,
        truncated_upper=ci.truncated_upper,
        grid_fallback=ci.grid_fallback,
        version=__version__,
    )
    return rec


def _text_line(rec: dict, digits: int) -> str:
    lo, hi, width = (f"{rec[k]:.{digits}f}" for k in ("lower", "upper", "width"))
    skip = {"method", "lower", "upper", "width", "truncated_lower", "truncated_upper", "grid_fallback"}
    rest = " ".join(f"{k}={v}" for k, v in rec.items() if k not in skip)
    flag = "  (grid fallback)" if rec["grid_fallback"] else ""
    return f"{rec['method']:<5} [{lo}, {hi}]  width={width}  {rest}{flag}"


def _report(records: list[dict], fmt: str, out: str | None, digits: int) -> None:
    if fmt == "text":
        _emit("".join(_text_line(r, digits) + "\n" for r in records), out)
    else:
        _records_out(records, fmt, out)


# subcommands -----------------------------------------------------------------

def cmd_normal_ci(args) -> int:
    alpha = check_alpha(args.alpha)
    d = NormalData(args.x, args.w, args.r)
    records = []
    for m in _methods(args.method, (Method.BAYES, Method.IM)):
        ci = bayes_normal_ci(d, alpha) if m is Method.BAYES else im_normal_ci(d, alpha)
        records.append(_interval_record(ci, 4, x=d.x, w=d.w, r=d.r, alpha=alpha))
    _report(records, args.format, args.out, 4)
    return 0


def _poisson_intervals(d: PoissonData, alphas, methods, prior, n, seed):
    """Intervals keyed by (method, alpha); one Monte Carlo sample per method."""
    out = {}
    for m in methods:
        if m is Method.BAYES:
            for a in alphas:
                out[m, a] = bayes_poisson_ci(d, prior, a)
            continue
        sample = (build_endpoint_sample if m is Method.IM else build_nim_sample)(d, n, seed)
        for a in alphas:
            out[m, a] = sample.interval(a)
    return out


def cmd_poisson_ci(args) -> int:
    alpha = check_alpha(args.alpha)
    d = PoissonData(args.x, args.w, args.m)
    prior = PriorSpec(args.a, args.b)
    methods = _methods(args.method, (Method.BAYES, Method.IM, Method.NIM))
    mc = any(m is not Method.BAYES for m in methods)
    seed, source = resolve_seed(args.seed) if mc else (None, None)
    if mc:
        _echo_seed(seed, source)
    cis = _poisson_intervals(d, (alpha,), methods, prior, args.n, seed)
    records = []
    for m in methods:
        extra = dict(a=prior.a, b=prior.b) if m is Method.BAYES else dict(n=args.n, seed=seed)
        records.append(_interval_record(cis[m, alpha], 2, x=d.x, w=d.w, m=d.m, alpha=alpha, **extra))
    _report(records, args.format, args.out, 2)
    return 0


def _parse_range(text: str) -> np.ndarray:
    try:
        parts = [float(p) for p in text.split(":")]
    except ValueError:
        raise UsageError(f"bad grid {text!r}; use start:stop:step") from None
    if len(parts) != 3:
        raise UsageError(f"bad grid {text!r}; use start:stop:step")
    start, stop, step = parts
    if not step > 0 or stop < start or start < 0:
        raise UsageError(f"grid {text!r} is empty or leaves the parameter space [0, inf)")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(count), 12)


def cmd_plaus(args) -> int:
    grid = _parse_range(args.grid)
    records = []
    if args.model == "normal":
        if args.w is None or args.r is None:
            raise UsageError("normal model needs --w and --r")
        d = NormalData(args.x, args.w, args.r)
        pl = np.atleast_1d(im_normal_plausibility(d, grid))
        base = dict(x=d.x, w=d.w, r=d.r, n="", seed="")
        records += [dict(method="IM", parameter=t, plausibility=round(float(p), 6), **base)
                    for t, p in zip(grid, pl)]
    else:
        if args.w is None or args.m is None:
            raise UsageError("poisson model needs --w and --m")
        d = PoissonData(args.x, args.w, args.m)
        d = PoissonData(int(d.x), int(d.w), d.m)
        seed, source = resolve_seed(args.seed)
        _echo_seed(seed, source)
        base = dict(x=d.x, w=d.w, m=d.m, n=args.n, seed=seed)
        for method, build in ((Method.IM, build_endpoint_sample), (Method.NIM, build_nim_sample)):
            pl = np.atleast_1d(build(d, args.n, seed).plausibility(grid))
            records += [dict(method=method.value, parameter=t, plausibility=round(float(p), 6), **base)
                        for t, p in zip(grid, pl)]
    for rec in records:
        rec["version"] = __version__
    _records_out(records, args.format, args.out)
    return 0


def normal_table_records(levels=TABLE_LEVELS) -> list[dict]:
    records = []
    for w in NORMAL_TABLE_W:
        for r in NORMAL_TABLE_R:
            d = NormalData(NORMAL_TABLE_X, w, r)
            for level in levels:
                alpha = round(1.0 - level, 12)
                cis = {Method.BAYES: bayes_normal_ci(d, alpha), Method.IM: im_normal_ci(d, alpha)}
                records += _mark_shortest(
                    [_interval_record(ci, 4, x=d.x, w=w, r=r, alpha=alpha) for ci in cis.values()], 4
                )
    return records


def poisson_table_records(n: int, seed: int, prior: PriorSpec, levels=TABLE_LEVELS) -> list[dict]:
    records = []
    methods = (Method.BAYES, Method.IM, Method.NIM)
    for x in POISSON_TABLE_X:
        for m in POISSON_TABLE_M:
            for w in POISSON_TABLE_W:
                d = PoissonData(x, w, float(m))
                alphas = tuple(round(1.0 - lv, 12) for lv in levels)
                cis = _poisson_intervals(d, alphas, methods, prior, n, seed)
                for a in alphas:
                    recs = [
                        _interval_record(cis[meth, a], 2, x=x, w=w, m=m, alpha=a,
                                         a=prior.a, b=prior.b, n=n, seed=seed)
                        for meth in methods
                    ]
                    records += _mark_shortest(recs, 2)
    return records


def _mark_shortest(recs: list[dict], digits: int) -> list[dict]:
    """Flag the narrowest interval(s) of one cell, compared at the printed precision."""
    best = min(round(r["width"], digits) for r in recs)
    for r in recs:
        r["shortest"] = round(r["width"], digits) == best
    return recs


def cmd_tables(args) -> int:
    records = []
    if args.table in ("normal", "all"):
        records += [dict(table="normal", **r) for r in normal_table_records()]
    if args.table in ("poisson", "all"):
        seed, source = resolve_seed(args.seed)
        _echo_seed(seed, source)
        prior = PriorSpec(args.a, args.b)
        records += [dict(table="poisson", **r) for r in poisson_table_records(args.n, seed, prior)]
    header = ["table", "method", "x", "w", "r", "m", "alpha", "level", "lower", "upper", "width",
              "shortest", "truncated_lower", "truncated_upper", "grid_fallback", "a", "b", "n", "seed",
              "version"]
    if args.format == "json":
        _records_out(records, "json", args.out)
    else:
        rows = [{k: r.get(k, "") for k in header} for r in records]
        _records_out(rows, "csv", args.out, header)
    return 0


def cmd_coverage(args) -> int:
    try:
        with open(args.grid) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read grid file: {exc}") from None
    seed = args.seed
    if seed is None and not grid_has_seed(text):
        seed, source = resolve_seed(None)
    else:
        source = "flag" if seed is not None else "grid file"
    grid = parse_grid_text(text, seed=seed)
    if args.full:
        grid = replace(grid, replicates=FULL_REPLICATES, mc_samples=FULL_MC_SAMPLES)
    _echo_seed(grid.seed, source)
    rows = run_coverage(grid, jobs=args.jobs)
    _emit(rows_to_json(rows) if args.format == "json" else rows_to_csv(rows), args.out)
    return 0


def cmd_diagnose(args) -> int:
    seed, source = resolve_seed(args.seed)
    _echo_seed(seed, source)
    res = uniformity_diagnostic(args.lam, args.epsilon, args.m, args.samples, args.n, seed)
    summary = dict(
        lam=args.lam, epsilon=args.epsilon, m=args.m, samples=args.samples, n=args.n,
        seed=seed, ks_distance=round(res.ks_distance, 6), version=__version__,
        **{f"reject_at_{a:g}": round(v, 6) for a, v in res.rejection.items()},
    )
    if args.format == "json":
        summary["ecdf"] = [[round(p, 6), round(f, 6)] for p, f in res.ecdf]
        _emit(json.dumps(summary, indent=2) + "\n", args.out)
        return 0
    buf = io.StringIO()
    buf.write("".join(f"# {k}={v}\n" for k, v in summary.items()))
    buf.write("p,ecdf\n")
    buf.write("".join(f"{p:.6f},{f:.6f}\n" for p, f in res.ecdf))
    _emit(buf.getvalue(), args.out)
    return 0


# parser ---------------------------------------------------------------------

def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be a nonnegative integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="imci", description="IM, NIM and Bayesian intervals for constrained parameters.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt_choices=("csv", "json"), default_fmt="csv"):
        sp.add_argument("--format", choices=fmt_choices, default=default_fmt)
        sp.add_argument("--out", help="write to this file instead of stdout")

    def mc(sp):
        sp.add_argument("--n", type=int, default=DEFAULT_MC_SAMPLES, help="Monte Carlo draws")
        sp.add_argument("--seed", type=int, help=f"random seed (default: ${SEED_ENV} or generated)")

    def prior(sp):
        sp.add_argument("--a", type=float, default=PriorSpec().a, help="prior shape for the background rate")
        sp.add_argument("--b", type=float, default=PriorSpec().b, help="prior rate for the background rate")

    sp = sub.add_parser("normal-ci", help="Bayes and IM intervals for a nonnegative normal mean")
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--w", type=float, required=True)
    sp.add_argument("--r", type=int, required=True)
    sp.add_argument("--alpha", type=float, default=0.10)
    sp.add_argument("--method", default="all", help="bayes, im or all")
    common(sp, ("text", "csv", "json"), "text")
    sp.set_defaults(func=cmd_normal_ci)

    sp = sub.add_parser("poisson-ci", help="Bayes, IM and NIM intervals for a Poisson signal rate")
    sp.add_argument("--x", type=_nonneg_int, required=True)
    sp.add_argument("--w", type=_nonneg_int, required=True)
    sp.add_argument("--m", type=float, required=True)
    sp.add_argument("--alpha", type=float, default=0.10)
    sp.add_argument("--method", default="all", help="bayes, im, nim or all")
    mc(sp)
    prior(sp)
    common(sp, ("text", "csv", "json"), "text")
    sp.set_defaults(func=cmd_poisson_ci)

    sp = sub.add_parser("plaus", help="plausibility curve over a parameter grid")
    sp.add_argument("--model", choices=("normal", "poisson"), required=True)
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--w", type=float)
    sp.add_argument("--r", type=int)
    sp.add_argument("--m", type=float)
    sp.add_argument("--grid", required=True, help="start:stop:step, inclusive")
    mc(sp)
    common(sp)
    sp.set_defaults(func=cmd_plaus)

    sp = sub.add_parser("tables", help="recompute the normal-mean and Poisson example tables")
    sp.add_argument("--table", choices=("normal", "poisson", "all"), default="all")
    mc(sp)
    prior(sp)
    common(sp)
    sp.set_defaults(func=cmd_tables)

    sp = sub.add_parser("coverage", help="coverage and expected length over a grid file")
    sp.add_argument("--grid", required=True, help="flat key = value grid file")
    sp.add_argument("--seed", type=int, help="overrides the grid file seed")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    sp.add_argument("--full", action="store_true", help=f"M = n = {FULL_REPLICATES}")
    common(sp)
    sp.set_defaults(func=cmd_coverage)

    sp = sub.add_parser("diagnose", help="uniformity of the NIM cdf at the true rate")
    sp.add_argument("--lam", type=float, required=True)
    sp.add_argument("--epsilon", type=float, default=3.0)
    sp.add_argument("--m", type=float, default=20.0)
    sp.add_argument("--samples", type=int, default=10_000)
    sp.add_argument("--n", type=int, default=2_000, help="Monte Carlo draws per data pair")
    sp.add_argument("--seed", type=int, help=f"random seed (default: ${SEED_ENV} or generated)")
    common(sp)
    sp.set_defaults(func=cmd_diagnose)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "n", 1) < 1:
            raise UsageError("--n must be >= 1")
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        return args.func(args)
    except ConvergenceError as exc:
        print(f"imci: numerical failure: {exc}", file=sys.stderr)
        return 3
    except DomainError as exc:
        print(f"imci: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
