"""Command-line front end.

Exit codes: 0 success, 1 validation failure, 2 bad flags or input,
3 runtime failure, 4 population smaller than the set size.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import shlex
import sys
from decimal import Decimal, InvalidOperation

import numpy as np

from . import estimators as est
from . import orss, specfun
from .distributions import parse_distribution
from .harness import ExperimentConfig, read_results_csv, run_experiment, spearman
from .sampler import Design, FinitePopulation, RankingModel
from .svgplot import render_svg

log = logging.getLogger("rssquant")

EXIT_OK, EXIT_VALIDATE, EXIT_USAGE, EXIT_RUNTIME, EXIT_POPULATION = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def parse_p_grid(text: str) -> list[float]:
    """``lo:hi:step`` (inclusive, exact decimals), a comma list, or one level."""
    try:
        if ":" in text:
            lo, hi, step = (Decimal(v) for v in text.split(":"))
            if step <= 0 or hi < lo:
                raise ValueError
            count = int((hi - lo) / step)
            levels = [lo + i * step for i in range(count + 1)]
        else:
            levels = [Decimal(v) for v in text.split(",")]
    except (InvalidOperation, ValueError):
        raise CliError(f"bad p-grid {text!r}; expected lo:hi:step or a comma list") from None
    out = [float(v) for v in levels]
    if not out or not all(0 < v < 1 for v in out):
        raise CliError(f"p-grid levels must lie in (0, 1): {text!r}")
    return out


def _int_list(text: str, flag: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise CliError(f"{flag} expects integers, got {text!r}") from None
    if any(v < 1 for v in vals):
        raise CliError(f"{flag} values must be positive")
    return vals


def _designs(args) -> list[Design]:
    ms, ks = _int_list(args.m, "--m"), _int_list(args.k, "--k")
    if len(ms) == 1 and len(ks) > 1:
        ms = ms * len(ks)
    if len(ks) == 1 and len(ms) > 1:
        ks = ks * len(ms)
    if len(ms) != len(ks):
        raise CliError("--m and --k lists must have equal length")
    return [Design(m, k) for m, k in zip(ms, ks)]


def _rank_models(text: str) -> list[RankingModel]:
    models = []
    for v in text.split(","):
        try:
            rho = float(v)
        except ValueError:
            raise CliError(f"--rho expects numbers in [0, 1], got {text!r}") from None
        if not 0 <= rho <= 1:
            raise CliError(f"--rho must lie in [0, 1], got {rho}")
        models.append(RankingModel.perfect() if rho == 1.0 else RankingModel.concomitant(rho))
    return models


def _estimators(text: str) -> list[str]:
    if text == "all":
        return list(est.ESTIMATOR_IDS)
    names = [v.strip() for v in text.split(",") if v.strip()]
    unknown = [n for n in names if n not in est.ESTIMATOR_IDS]
    if unknown or not names:
        raise CliError(f"unknown estimator(s) {unknown}; choose from {', '.join(est.ESTIMATOR_IDS)} or 'all'")
    return names


def _cache(args) -> orss.WeightCache:
    if args.cache_dir == "none":
        return orss.WeightCache(None)
    return orss.WeightCache(args.cache_dir or orss.default_cache_dir())


def _echo(argv_like: list[str]) -> None:
    print("# resolved: rssquant " + shlex.join(argv_like), file=sys.stderr)


# -- simulate ------------------------------------------------------------------

def cmd_simulate(args) -> int:
    try:
        dist = parse_distribution(args.dist)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    designs = _designs(args)
    models = _rank_models(args.rho)
    p_grid = parse_p_grid(args.p_grid)
    names = _estimators(args.estimators)
    if args.replicates < 1:
        raise CliError("--replicates must be positive")
    _echo(["simulate", "--dist", dist.spec, "--m", ",".join(str(d.m) for d in designs),
           "--k", ",".join(str(d.k) for d in designs), "--rho", ",".join(f"{m.effective_rho:g}" for m in models),
           "--p-grid", args.p_grid, "--replicates", str(args.replicates), "--seed", str(args.seed),
           "--estimators", ",".join(names), "--out", args.out] + (["--no-orss"] if args.no_orss else []))
    cfg = ExperimentConfig(designs=designs, p_grid=p_grid, distribution=dist, rank_models=models,
                           estimators=names, replicates=args.replicates, master_seed=args.seed,
                           orss_enabled=not args.no_orss, threads=args.threads, weight_cache=_cache(args))
    run_experiment(cfg).write_csv(args.out)
    return EXIT_OK


# -- weights -------------------------------------------------------------------

def cmd_weights(args) -> int:
    kind = args.kind.replace("-", "_")
    if not 0 < args.p < 1:
        raise CliError("--p must lie in (0, 1)")
    if args.m < 1 or args.k < 1:
        raise CliError("--m and --k must be positive")
    _echo(["weights", "--m", str(args.m), "--k", str(args.k), "--p", repr(args.p), "--kind", args.kind,
           "--out", args.out])
    design = Design(args.m, args.k)
    if kind == "orss_hd":
        table = orss.orss_hd_weights(design, args.p, quad_tol=args.quad_tol)
    else:
        table = orss.orss_lf_weights(design, args.p)
    orss.write_weight_tables(args.out, [table])
    return EXIT_OK


# -- population study ----------------------------------------------------------

def _to_float(cell):
    try:
        v = float(cell)
    except (TypeError, ValueError):
        return None
    return v if math.isfinite(v) else None


def load_columns(path: str, columns: list[str]) -> tuple[dict[str, np.ndarray], int]:
    """Numeric columns of a CSV with incomplete rows dropped; returns (columns, dropped)."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in columns if c not in header]
        if missing:
            raise CliError(f"{path}: missing column(s) {', '.join(missing)}")
        kept = {c: [] for c in columns}
        dropped = 0
        for row in reader:
            vals = [_to_float(row.get(c)) for c in columns]
            if any(v is None for v in vals):
                dropped += 1
                continue
            for c, v in zip(columns, vals):
                kept[c].append(v)
    return {c: np.array(v, dtype=float) for c, v in kept.items()}, dropped


def cmd_population_study(args) -> int:
    designs = _designs(args)
    if len(designs) != 1:
        raise CliError("population-study takes a single (m, k) design")
    design = designs[0]
    p_grid = parse_p_grid(args.p_grid)
    names = _estimators(args.estimators)
    screen = [c for c in (args.screen_rankers or "").split(",") if c]
    cols, dropped = load_columns(args.input, [args.response, args.ranker])
    if dropped:
        log.warning("dropped %d row(s) with missing or non-numeric %s/%s", dropped, args.response, args.ranker)
    _echo(["population-study", "--input", args.input, "--response", args.response, "--ranker", args.ranker,
           "--m", str(args.m), "--k", str(args.k), "--replicates", str(args.replicates), "--p-grid", args.p_grid,
           "--seed", str(args.seed), "--estimators", ",".join(names), "--out", args.out]
          + (["--screen-rankers", args.screen_rankers] if screen else []) + (["--no-orss"] if args.no_orss else []))
    for col in screen:
        scols, _ = load_columns(args.input, [args.response, col])
        rho = spearman(scols[args.response], scols[col])
        print(f"spearman({args.response}, {col}) = {rho:.3f}  (N={scols[col].size})")
    pop = FinitePopulation(cols[args.response], cols[args.ranker], name=f"{args.response}~{args.ranker}")
    print(f"population size N = {pop.size}", file=sys.stderr)
    if pop.size < design.k:
        raise CliError(f"population has {pop.size} usable rows, fewer than the set size k={design.k}",
                       EXIT_POPULATION)
    if pop.size < design.n:
        raise CliError(f"population has {pop.size} usable rows, fewer than n={design.n} for the SRS reference",
                       EXIT_POPULATION)
    cfg = ExperimentConfig(designs=[design], p_grid=p_grid, population=pop, estimators=names,
                           replicates=args.replicates, master_seed=args.seed, orss_enabled=not args.no_orss,
                           threads=args.threads, weight_cache=_cache(args))
    run_experiment(cfg).write_csv(args.out)
    return EXIT_OK


# -- plot ----------------------------------------------------------------------

def cmd_plot(args) -> int:
    try:
        rows = read_results_csv(args.input).rows
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot read results from {args.input}: {exc}") from None
    if args.distribution:
        rows = [r for r in rows if r.distribution == args.distribution]
    if args.rho:
        rows = [r for r in rows if r.rho == args.rho]
    if not rows:
        raise CliError(f"{args.input}: no result rows to plot")
    with open(args.out, "w", newline="\n") as fh:
        fh.write(render_svg(rows))
    return EXIT_OK


# -- validate ------------------------------------------------------------------

def _check_binomial_tail():
    worst = 0.0
    for k in range(1, 9):
        for a in range(1, k + 1):
            for t in np.linspace(0, 1, 21):
                tail = sum(math.comb(k, j) * t ** j * (1 - t) ** (k - j) for j in range(a, k + 1))
                worst = max(worst, abs(specfun.beta_cdf((a, k - a + 1), float(t)) - tail))
    return worst <= 1e-12, f"max |I - binomial tail| = {worst:.2e}"


def _check_complement():
    ok = all(specfun.beta_cdf_complement_identity_check(a, b, float(t))
             for a in range(1, 7) for b in range(1, 7) for t in np.linspace(0, 1, 101))
    return ok, "I_{a,b}(t) + I_{b,a}(1-t) = 1 for a,b in 1..6"


def _check_mixture():
    worst = 0.0
    for k in range(1, 7):
        for u in np.linspace(0, 1, 51):
            avg = sum(specfun.beta_cdf((r, k - r + 1), float(u)) for r in range(1, k + 1)) / k
            worst = max(worst, abs(avg - u))
    return worst <= 1e-12, f"max |mean_r I_(r,k-r+1)(u) - u| = {worst:.2e}"


def _check_hd_telescoping():
    worst = 0.0
    for n in (1, 2, 5, 15, 25):
        for p in (0.1, 0.5, 0.9):
            worst = max(worst, abs(math.fsum(est.srs_hd_weights(n, p)) - 1))
    for m, k in ((5, 3), (5, 5), (3, 2)):
        for p in (0.1, 0.5, 0.9):
            W = est.component_weight_matrix(Design(m, k), p, "hd")
            worst = max(worst, max(abs(math.fsum(W[:, r]) - 1) for r in range(k)))
    return worst <= 1e-15, f"max |sum of HD weights - 1| = {worst:.1e}"


def _check_psi_normalization():
    worst = 0.0
    for m, k in ((1, 2), (2, 2), (2, 3)):
        d = Design(m, k)
        for i in range(1, d.n + 1):
            grid = np.linspace(0, 1, 2001)
            vals = [orss.orss_pdf_probscale(d, i, float(u)) for u in grid]
            worst = max(worst, abs(_simpson(vals, grid[1] - grid[0]) - 1))
    return worst <= 1e-6, f"max |integral psi_i - 1| = {worst:.1e}"


def _simpson(vals, h):
    v = np.asarray(vals)
    return float(h / 3 * (v[0] + v[-1] + 4 * v[1:-1:2].sum() + 2 * v[2:-1:2].sum()))


def _check_oracle():
    worst = 0.0
    for m, k in ((1, 2), (2, 2), (3, 2), (2, 3), (1, 4), (2, 4)):
        d = Design(m, k)
        for t in np.linspace(0.02, 0.98, 13):
            G = orss.orss_cdf_all(d, float(t))
            for i in range(1, d.n + 1):
                worst = max(worst, abs(G[i - 1] - orss.brute_force_orss_cdf(d, i, float(t))))
    return worst <= 1e-10, f"polynomial vs subset enumeration, n <= 8: {worst:.1e}"


def _check_degeneracy():
    rng = np.random.default_rng(7)
    x = np.sort(rng.normal(size=9))
    d = Design(9, 1)
    ok = True
    for p in (0.1, 0.3, 0.5, 0.77):
        ok &= est.rss_lf(x, p, d) == est.lf_srs(x, p)
        ok &= est.rss_hd(x, p, d) == est.hd_srs(x, p)
        ok &= est.emp_quantile_pooled(x, p) == est.emp_quantile_srs(x, p)
    return bool(ok), "k=1 RSS estimators equal their SRS counterparts"


def _check_constant():
    c = 2.718281828
    ok = True
    for p in (0.1, 0.5, 0.9):
        ok &= est.hd_srs(np.full(15, c), p) == c
        ok &= est.rss_hd(np.full(15, c), p, Design(5, 3)) == c
    return bool(ok), "HD-type estimators return a constant sample exactly"


VALIDATION_CHECKS = [
    ("beta_binomial_tail", _check_binomial_tail),
    ("beta_complement_identity", _check_complement),
    ("stratum_mixture_identity", _check_mixture),
    ("hd_weight_telescoping", _check_hd_telescoping),
    ("psi_normalization", _check_psi_normalization),
    ("orss_oracle_equivalence", _check_oracle),
    ("k1_degeneracy", _check_degeneracy),
    ("hd_constant_sample", _check_constant),
]


def run_validation(out=None) -> bool:
    out = out or sys.stdout
    all_ok = True
    for name, check in VALIDATION_CHECKS:
        try:
            ok, detail = check()
        except Exception as exc:  # a broken kernel must show up as a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        all_ok &= bool(ok)
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}", file=out)
    return all_ok


def cmd_validate(args) -> int:
    return EXIT_OK if run_validation() else EXIT_VALIDATE


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rssquant", description="Quantile L-estimation under ranked set sampling.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p, default_grid):
        p.add_argument("--m", required=True, help="cycles (comma list allowed)")
        p.add_argument("--k", required=True, help="set size (comma list allowed)")
        p.add_argument("--p-grid", default=default_grid, help="lo:hi:step, inclusive")
        p.add_argument("--replicates", type=int, default=20_000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--estimators", default="all")
        p.add_argument("--out", required=True)
        p.add_argument("--no-orss", action="store_true", help="skip the ORSS estimators")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        p.add_argument("--cache-dir", default=None, help="weight-table cache directory, or 'none'")

    sim = sub.add_parser("simulate", help="Monte Carlo relative efficiencies for a parent distribution")
    sim.add_argument("--dist", required=True, help="normal:mean,sd | exp:rate | weibull:shape,scale")
    sim.add_argument("--rho", default="1", help="ranking correlation(s) in [0, 1]; 1 = perfect")
    add_run_flags(sim, "0.1:0.9:0.1")
    sim.set_defaults(func=cmd_simulate)

    wts = sub.add_parser("weights", help="write an ORSS weight table")
    wts.add_argument("--m", type=int, required=True)
    wts.add_argument("--k", type=int, required=True)
    wts.add_argument("--p", type=float, required=True)
    wts.add_argument("--kind", choices=["orss-lf", "orss-hd"], required=True)
    wts.add_argument("--quad-tol", type=float, default=orss.DEFAULT_QUAD_TOL)
    wts.add_argument("--out", required=True)
    wts.set_defaults(func=cmd_weights)

    pop = sub.add_parser("population-study", help="RSS resampling study on a finite population CSV")
    pop.add_argument("--input", required=True)
    pop.add_argument("--response", required=True)
    pop.add_argument("--ranker", required=True)
    pop.add_argument("--screen-rankers", default=None, help="comma list of candidate ranker columns")
    add_run_flags(pop, "0.2:0.8:0.05")
    pop.set_defaults(func=cmd_population_study)

    plt = sub.add_parser("plot", help="SVG chart of RE against p from a results CSV")
    plt.add_argument("--input", required=True)
    plt.add_argument("--out", required=True)
    plt.add_argument("--distribution", default=None, help="keep only this distribution label")
    plt.add_argument("--rho", default=None, help="keep only this rho label")
    plt.set_defaults(func=cmd_plot)

    val = sub.add_parser("validate", help="run the fast identity checks")
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
