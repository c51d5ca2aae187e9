"""Distribution of pooled ORSS order statistics and ORSS weight tables.

On the probability scale a perfectly ranked RSS observation from stratum r
falls below t with probability q_r(t) = I_{r,k-r+1}(t). The count C(t) of
pooled observations below t is a sum of k independent Binomial(m, q_r)
variables, so its pmf is the coefficient vector of
prod_r [(1 - q_r) + q_r z]^m, obtained by k-1 convolutions in O(n^2).
G_i(t) = P{C(t) >= i} is the cdf of the i-th pooled order statistic and its
derivative psi_i is the distribution-free ORSS score function.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import specfun
from .estimators import QuantileTarget
from .sampler import Design

FD_STEP = 1e-6
DEFAULT_QUAD_TOL = 1e-8
MAX_QUAD_DEPTH = 20
BRUTE_FORCE_MAX_N = 14
WEIGHT_KINDS = ("orss_lf", "orss_hd")
CACHE_HEADER = ["m", "k", "p", "kind", "i", "weight"]


class QuadratureError(ArithmeticError):
    pass


def stratum_prob(r: int, k: int, t: float) -> float:
    if not 1 <= r <= k:
        raise ValueError(f"rank must lie in 1..{k}, got {r}")
    return specfun.beta_cdf((r, k - r + 1), t)


def _binom_pmf(m: int, q: float) -> np.ndarray:
    j = np.arange(m + 1)
    coef = np.array([math.comb(m, int(x)) for x in j], dtype=float)
    return coef * q ** j * (1.0 - q) ** (m - j)


@dataclass(frozen=True)
class CountDistribution:
    t: float
    probs: np.ndarray
    ops: int = field(default=0, compare=False)


def count_distribution(design: Design, t: float) -> CountDistribution:
    """pmf of the number of pooled observations at or below level t.

    ``ops`` records the multiply-adds spent in the convolutions.
    """
    m, k = design.m, design.k
    acc = _binom_pmf(m, stratum_prob(1, k, t))
    ops = 0
    for r in range(2, k + 1):
        b = _binom_pmf(m, stratum_prob(r, k, t))
        ops += acc.size * b.size
        acc = np.convolve(acc, b)
    acc[(acc < 0) & (acc > -1e-15)] = 0.0
    return CountDistribution(t, acc, ops)


def convolution_ops(design: Design) -> int:
    """Multiply-adds for one count distribution (counted, not estimated)."""
    return count_distribution(design, 0.5).ops


def _upper_tail(probs: np.ndarray) -> np.ndarray:
    """[G_1, ..., G_n] from the pmf by one reverse cumulative sum."""
    tail = np.cumsum(probs[::-1])[::-1]
    return np.clip(tail[1:], 0.0, 1.0)


def orss_cdf_all(design: Design, t: float) -> np.ndarray:
    if t <= 0.0:
        return np.zeros(design.n)
    if t >= 1.0:
        return np.ones(design.n)
    return _upper_tail(count_distribution(design, t).probs)


def orss_cdf(design: Design, i: int, t: float) -> float:
    """G_i(t): probability that the i-th pooled order statistic is <= t."""
    if not 1 <= i <= design.n:
        raise ValueError(f"order index must lie in 1..{design.n}, got {i}")
    return float(orss_cdf_all(design, t)[i - 1])


@dataclass(frozen=True)
class OrssCdfTable:
    design: Design
    grid: np.ndarray
    values: np.ndarray  # values[i-1, j] = G_i(grid[j])
    ops: int = 0


def orss_cdf_table(design: Design, grid) -> OrssCdfTable:
    grid = np.asarray(grid, dtype=float)
    cols, ops = [], 0
    for t in grid:
        if 0.0 < t < 1.0:
            cd = count_distribution(design, float(t))
            ops += cd.ops
            cols.append(_upper_tail(cd.probs))
        else:
            cols.append(orss_cdf_all(design, float(t)))
    values = np.column_stack(cols) if cols else np.empty((design.n, 0))
    return OrssCdfTable(design, grid, values, ops)


def orss_pdf_probscale(design: Design, i: int, t: float, h: float = FD_STEP) -> float:
    """psi_i(t) by finite differences of G_i; one-sided next to 0 and 1."""
    if not 1 <= i <= design.n:
        raise ValueError(f"order index must lie in 1..{design.n}, got {i}")
    val = specfun.central_diff(lambda u: orss_cdf_all(design, u)[i - 1], t, h, lower=0.0, upper=1.0)
    return 0.0 if abs(val) < 1e-12 and val < 0 else val


# -- brute-force oracle --------------------------------------------------------

def _unit_probs(design: Design, t: float) -> np.ndarray:
    return np.repeat([stratum_prob(r, design.k, t) for r in range(1, design.k + 1)], design.m)


def _subset_count_pmf(q: np.ndarray) -> np.ndarray:
    n = q.size
    masks = np.arange(2 ** n, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    prods = np.where(bits, q, 1.0 - q).prod(axis=1)
    return np.bincount(bits.sum(axis=1), weights=prods, minlength=n + 1)


def _check_brute_size(design: Design) -> None:
    if design.n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute-force enumeration is limited to n <= {BRUTE_FORCE_MAX_N}, got n={design.n}")


def brute_force_orss_cdf(design: Design, i: int, t: float) -> float:
    """G_i(t) by summing over every subset of the n pooled units."""
    _check_brute_size(design)
    if not 1 <= i <= design.n:
        raise ValueError(f"order index must lie in 1..{design.n}, got {i}")
    pmf = _subset_count_pmf(_unit_probs(design, t))
    return float(pmf[i:].sum())


def brute_force_psi(design: Design, i: int, u: float) -> float:
    """psi_i(u) from the explicit subset formula (exact derivative, no differencing)."""
    _check_brute_size(design)
    k = design.k
    q = _unit_probs(design, u)
    dens = np.repeat([specfun.beta_pdf((r, k - r + 1), u) for r in range(1, k + 1)], design.m)
    total = 0.0
    for unit in range(design.n):
        others = np.delete(q, unit)
        total += dens[unit] * _subset_count_pmf(others)[i - 1]
    return float(total)


# -- weight tables -------------------------------------------------------------

@dataclass(frozen=True)
class WeightTable:
    design: Design
    p: float
    kind: str
    weights: np.ndarray

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ValueError(f"kind must be one of {WEIGHT_KINDS}, got {self.kind!r}")
        if len(self.weights) != self.design.n:
            raise ValueError("weight table length must equal n")

    @property
    def r_p(self) -> int:
        return QuantileTarget(self.design.n, self.p).r_p


# finite differences with h = 1e-6 carry ~1e-10 of rounding noise
_NEG_SLACK = 1e-9


def _clean(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float).copy()
    w[(w < 0) & (w > -_NEG_SLACK)] = 0.0
    return w


def orss_lf_weights(design: Design, p: float) -> WeightTable:
    """Riemann-sum ORSS weights psi_{r_p}(i/n) / n."""
    n = design.n
    r_p = QuantileTarget(n, p).r_p
    w = [orss_pdf_probscale(design, r_p, i / n) / n for i in range(1, n + 1)]
    return WeightTable(design, p, "orss_lf", _clean(w))


def _adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int) -> float:
    fa, fm, fb = f(a), f((a + b) / 2), f(b)
    whole = (b - a) / 6 * (fa + 4 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = (a + b) / 2
        lm, rm = (a + m) / 2, (m + b) / 2
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6 * (fa + 4 * flm + fm)
        right = (b - m) / 6 * (fm + 4 * frm + fb)
        diff = left + right - whole
        if abs(diff) <= 15 * tol:
            return left + right + diff / 15
        if depth >= max_depth:
            raise QuadratureError(f"adaptive Simpson did not reach tolerance {tol} on [{a}, {b}]")
        return (recurse(a, m, fa, flm, fm, left, tol / 2, depth + 1)
                + recurse(m, b, fm, frm, fb, right, tol / 2, depth + 1))

    return recurse(a, b, fa, fm, fb, whole, tol, 1)


def orss_hd_weights(design: Design, p: float, quad_tol: float = DEFAULT_QUAD_TOL,
                    max_depth: int = MAX_QUAD_DEPTH) -> WeightTable:
    """Exact plug-in ORSS weights: integrals of psi_{r_p} over ((i-1)/n, i/n]."""
    if not quad_tol > 0:
        raise ValueError("quad_tol must be positive")
    n = design.n
    r_p = QuantileTarget(n, p).r_p
    memo: dict[float, float] = {}

    def psi(u: float) -> float:
        if u not in memo:
            memo[u] = orss_pdf_probscale(design, r_p, u)
        return memo[u]

    if n == 1:
        # the single interval carries all of psi's mass
        return WeightTable(design, p, "orss_hd", np.ones(1))
    w = [_adaptive_simpson(psi, (i - 1) / n, i / n, quad_tol, max_depth) for i in range(1, n + 1)]
    return WeightTable(design, p, "orss_hd", _clean(w))


def build_weight_table(design: Design, p: float, kind: str) -> WeightTable:
    if kind == "orss_lf":
        return orss_lf_weights(design, p)
    if kind == "orss_hd":
        return orss_hd_weights(design, p)
    raise ValueError(f"kind must be one of {WEIGHT_KINDS}, got {kind!r}")


# -- cache files ---------------------------------------------------------------

def format_p(p: float) -> str:
    return f"{p:.17g}"


def write_weight_tables(path, tables) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CACHE_HEADER)
        for tab in tables:
            for i, w in enumerate(tab.weights, start=1):
                writer.writerow([tab.design.m, tab.design.k, format_p(tab.p), tab.kind, i, repr(float(w))])


def read_weight_tables(path) -> list[WeightTable]:
    groups: dict[tuple, list[tuple[int, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CACHE_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CACHE_HEADER)}")
        for row in reader:
            key = (int(row["m"]), int(row["k"]), row["p"], row["kind"])
            groups.setdefault(key, []).append((int(row["i"]), float(row["weight"])))
    tables = []
    for (m, k, p, kind), rows in groups.items():
        rows.sort()
        tables.append(WeightTable(Design(m, k), float(p), kind, np.array([w for _, w in rows])))
    return tables


class WeightCache:
    """In-memory table cache, optionally persisted as one CSV per table."""

    def __init__(self, directory: str | os.PathLike | None = None):
        self.directory = Path(directory) if directory is not None else None
        self._tables: dict[tuple, WeightTable] = {}

    def _file(self, key) -> Path:
        m, k, p, kind = key
        return self.directory / f"{kind}_m{m}_k{k}_p{p}.csv"

    def get(self, design: Design, p: float, kind: str) -> WeightTable:
        key = (design.m, design.k, format_p(p), kind)
        if key in self._tables:
            return self._tables[key]
        table = None
        if self.directory is not None and self._file(key).exists():
            (table,) = read_weight_tables(self._file(key))
        if table is None:
            table = build_weight_table(design, p, kind)
            if self.directory is not None:
                self.directory.mkdir(parents=True, exist_ok=True)
                tmp = self._file(key).with_suffix(f".{os.getpid()}.tmp")
                write_weight_tables(tmp, [table])
                os.replace(tmp, self._file(key))
        self._tables[key] = table
        return table


def default_cache_dir() -> Path | None:
    env = os.environ.get("RSSQUANT_CACHE")
    if env == "":
        return None
    if env:
        return Path(env)
    return Path.home() / ".cache" / "rssquant"

