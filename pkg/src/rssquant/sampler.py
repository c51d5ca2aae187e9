"""SRS and RSS sample generation with counter-based random streams.

Every replicate owns a Philox stream keyed by the master seed whose counter
encodes ``(replicate_index, stream_id)``; nothing depends on draw order
across replicates, so replicates can be generated in any order or in
parallel and still reproduce bit for bit.

Internally draws happen in two phases: a cheap per-replicate loop pulls raw
uniforms/normals from each stream, then the transforms (inverse cdf,
ranking, selection) run vectorised over a whole block of replicates.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .distributions import Distribution, StratumLaw

log = logging.getLogger(__name__)

_SRS_STREAM = 0
_RSS_STREAM = 1
_POP_SRS_STREAM = 2
_POP_RSS_STREAM = 3
_TINY_U = 2.0 ** -54


@dataclass(frozen=True)
class Design:
    m: int
    k: int

    def __post_init__(self):
        if self.m < 1 or self.k < 1:
            raise ValueError(f"design needs m >= 1 and k >= 1, got m={self.m}, k={self.k}")

    @property
    def n(self) -> int:
        return self.m * self.k

    def __str__(self):
        return f"({self.m},{self.k})"


@dataclass(frozen=True)
class RankingModel:
    """Perfect ranking when ``rho is None``, else concomitant ranking."""

    rho: float | None = None

    def __post_init__(self):
        if self.rho is not None and not (0.0 <= self.rho <= 1.0):
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")

    @classmethod
    def perfect(cls) -> "RankingModel":
        return cls(None)

    @classmethod
    def concomitant(cls, rho: float) -> "RankingModel":
        return cls(float(rho))

    @property
    def effective_rho(self) -> float:
        return 1.0 if self.rho is None else self.rho

    @property
    def is_perfect(self) -> bool:
        return self.rho is None or self.rho == 1.0


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    replicate_index: int = 0

    def __post_init__(self):
        if not (0 <= self.master_seed < 2**64):
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.replicate_index < 0:
            raise ValueError("replicate_index must be nonnegative")


@dataclass
class RssSample:
    """``values[j, r]`` is the measured unit of judgment rank r+1 in cycle j+1."""

    values: np.ndarray
    design: Design

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.design.m, self.design.k):
            raise ValueError(f"expected shape {(self.design.m, self.design.k)}, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("RSS sample contains non-finite entries")

    def pooled(self) -> np.ndarray:
        return np.sort(self.values.ravel(), kind="stable")

    def column(self, r: int) -> np.ndarray:
        """Measurements with judgment rank ``r`` (1-based)."""
        return self.values[:, r - 1]


@dataclass
class FinitePopulation:
    response: np.ndarray
    ranker: np.ndarray
    name: str = "population"

    def __post_init__(self):
        self.response = np.asarray(self.response, dtype=float)
        self.ranker = np.asarray(self.ranker, dtype=float)
        if self.response.shape != self.ranker.shape or self.response.ndim != 1:
            raise ValueError("response and ranker must be 1-d vectors of equal length")
        if not (np.all(np.isfinite(self.response)) and np.all(np.isfinite(self.ranker))):
            raise ValueError("population contains missing or non-finite values")

    @property
    def size(self) -> int:
        return self.response.size


def stream(seed: SeedSpec, stream_id: int = 0) -> np.random.Generator:
    counter = [0, 0, seed.replicate_index, stream_id]
    return np.random.Generator(np.random.Philox(key=seed.master_seed, counter=counter))


def _open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    u = rng.random(size)
    u[u == 0.0] = _TINY_U
    return u


def _replicate_seeds(master_seed: int, replicates: Sequence[int] | range):
    return [SeedSpec(master_seed, int(b)) for b in replicates]


def srs_sample(d: Distribution, n: int, seed: SeedSpec) -> np.ndarray:
    if n < 1:
        raise ValueError("sample size must be positive")
    return d.quantile(_open_uniform(stream(seed, _SRS_STREAM), n))


def srs_batch(d: Distribution, n: int, master_seed: int, replicates) -> np.ndarray:
    """Row b equals ``srs_sample(d, n, SeedSpec(master_seed, b))``."""
    seeds = _replicate_seeds(master_seed, replicates)
    u = np.stack([_open_uniform(stream(s, _SRS_STREAM), n) for s in seeds]) if seeds else np.empty((0, n))
    return d.quantile(u) if u.size else u


def _draw_sets(seeds, design: Design):
    shape = (design.m, design.k, design.k)
    us, zs = [], []
    for s in seeds:
        rng = stream(s, _RSS_STREAM)
        us.append(_open_uniform(rng, shape))
        zs.append(rng.standard_normal(shape))
    return np.stack(us), np.stack(zs)


def _select_by_rank(y: np.ndarray, key: np.ndarray) -> np.ndarray:
    """From sets laid out as [..., j, r, unit], keep the unit ranked r in set (j, r)."""
    k = y.shape[-1]
    order = np.argsort(key, axis=-1, kind="stable")
    pick = order[..., np.arange(k), np.arange(k)]
    return np.take_along_axis(y, pick[..., None], axis=-1)[..., 0]


def _rank_key(d: Distribution, y: np.ndarray, z: np.ndarray, model: RankingModel) -> np.ndarray:
    if model.is_perfect:
        return y
    mu, sd = d.mean_sd()
    rho = model.rho
    return rho * (y - mu) / sd + math.sqrt(1.0 - rho * rho) * z


def rss_batch(d: Distribution, design: Design, models: Sequence[RankingModel], master_seed: int,
              replicates) -> list[np.ndarray]:
    """RSS values for several ranking models sharing the same drawn sets.

    Returns one array per model of shape (B, m, k); slice b equals
    ``rss_sample(d, design, model, SeedSpec(master_seed, b)).values``.
    """
    seeds = _replicate_seeds(master_seed, replicates)
    if not seeds:
        return [np.empty((0, design.m, design.k)) for _ in models]
    u, z = _draw_sets(seeds, design)
    y = d.quantile(u)
    return [_select_by_rank(y, _rank_key(d, y, z, model)) for model in models]


def rss_sample(d: Distribution, design: Design, rank_model: RankingModel, seed: SeedSpec) -> RssSample:
    """One ranked set sample: m cycles, each measuring one unit per judgment rank.

    Each of the m*k measurements comes from its own fresh set of k units,
    ranked by the concomitant (or by the response under perfect ranking).
    """
    (vals,) = rss_batch(d, design, [rank_model], seed.master_seed, [seed.replicate_index])
    return RssSample(vals[0], design)


def concomitant_pairs(d: Distribution, rho: float, size: int, seed: SeedSpec) -> tuple[np.ndarray, np.ndarray]:
    """(Y, X) pairs under the concomitant model, for calibrating rho."""
    rng = stream(seed, _RSS_STREAM)
    y = d.quantile(_open_uniform(rng, size))
    z = rng.standard_normal(size)
    return y, _rank_key(d, y, z, RankingModel.concomitant(rho))


def _subset_indices(u: np.ndarray, population_size: int) -> np.ndarray:
    """Map uniforms [..., s] to s distinct indices in range(population_size).

    Sequential selection: the j-th draw is uniform over the N-j unused
    indices and is shifted past the already-chosen ones in sorted order.
    """
    s = u.shape[-1]
    if s > population_size:
        raise ValueError(f"cannot draw {s} distinct units from a population of {population_size}")
    out = np.empty(u.shape, dtype=np.int64)
    chosen_sorted = np.empty(u.shape[:-1] + (0,), dtype=np.int64)
    for j in range(s):
        c = np.minimum((u[..., j] * (population_size - j)).astype(np.int64), population_size - j - 1)
        for i in range(j):
            c = c + (c >= chosen_sorted[..., i])
        out[..., j] = c
        chosen_sorted = np.sort(np.concatenate([chosen_sorted, c[..., None]], axis=-1), axis=-1)
    return out


def population_srs_batch(pop: FinitePopulation, n: int, master_seed: int, replicates) -> np.ndarray:
    """n units drawn without replacement from the population, per replicate."""
    seeds = _replicate_seeds(master_seed, replicates)
    if not seeds:
        return np.empty((0, n))
    u = np.stack([stream(s, _POP_SRS_STREAM).random(n) for s in seeds])
    return pop.response[_subset_indices(u, pop.size)]


def population_rss_batch(pop: FinitePopulation, design: Design, master_seed: int, replicates) -> np.ndarray:
    if pop.size < design.k:
        raise ValueError(f"population of {pop.size} units is smaller than the set size {design.k}")
    seeds = _replicate_seeds(master_seed, replicates)
    if not seeds:
        return np.empty((0, design.m, design.k))
    shape = (design.m, design.k, design.k)
    us, jit = [], []
    for s in seeds:
        rng = stream(s, _POP_RSS_STREAM)
        us.append(rng.random(shape))
        jit.append(rng.random(shape))
    idx = _subset_indices(np.stack(us), pop.size)
    jitter = np.stack(jit)
    ranker = pop.ranker[idx]
    # ties in the ranker are broken by the jitter
    order = np.lexsort((jitter, ranker), axis=-1)
    k = design.k
    pick = order[..., np.arange(k), np.arange(k)]
    chosen = np.take_along_axis(idx, pick[..., None], axis=-1)[..., 0]
    return pop.response[chosen]


def rss_from_population(pop: FinitePopulation, design: Design, seed: SeedSpec) -> RssSample:
    """RSS drawn from a finite population ranked by its ranker column.

    Each set holds k distinct units; sets are independent of each other,
    so a unit may appear in more than one set.
    """
    vals = population_rss_batch(pop, design, seed.master_seed, [seed.replicate_index])
    return RssSample(vals[0], design)


def order_stat_mean(d: Distribution, r: int, k: int) -> float:
    """E[Y_(r:k)] by quadrature of y f_(r)(y) on the probability scale."""
    law = StratumLaw(d, r, k)
    from .specfun import beta_pdf

    def integrand(u):
        return float(d.quantile(u)) * beta_pdf(law.beta, u)

    val, _ = integrate.quad(integrand, 0.0, 1.0, limit=200, epsabs=1e-12, epsrel=1e-10)
    return val


@dataclass(frozen=True)
class MeanVarianceReport:
    design: Design
    replicates: int
    mc_variance: float
    formula_variance: float
    srs_variance: float

    @property
    def relative_error(self) -> float:
        return abs(self.mc_variance - self.formula_variance) / self.formula_variance


def rss_mean_variance_check(d: Distribution, design: Design, replicates: int, seed: int,
                            block: int = 20_000) -> MeanVarianceReport:
    """Compare the MC variance of the RSS mean with its closed form under perfect ranking."""
    mu, sd = d.mean_sd()
    n, k = design.n, design.k
    strat = sum((order_stat_mean(d, r, k) - mu) ** 2 for r in range(1, k + 1))
    formula = sd * sd / n - strat / (n * k)
    means = []
    for start in range(0, replicates, block):
        reps = range(start, min(start + block, replicates))
        (vals,) = rss_batch(d, design, [RankingModel.perfect()], seed, reps)
        means.append(vals.reshape(len(reps), -1).mean(axis=1))
    means = np.concatenate(means)
    return MeanVarianceReport(design, replicates, float(means.var(ddof=1)), formula, sd * sd / n)
