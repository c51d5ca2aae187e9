"""Monte Carlo relative-efficiency engine.

Replicates are processed in fixed-size blocks. Each block draws its samples
from per-replicate counter-based streams, evaluates every estimator on the
same samples (paired comparison), and returns per-cell error sums. Blocks
are reduced in index order, so results do not depend on the thread count.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from . import estimators as est
from .distributions import Distribution
from .orss import WeightCache
from .sampler import (Design, FinitePopulation, RankingModel, population_rss_batch, population_srs_batch,
                      rss_batch, srs_batch)

log = logging.getLogger(__name__)

RESULT_HEADER = ["distribution", "rho", "m", "k", "p", "estimator", "bias", "mse", "re", "mc_se"]
DEFAULT_BLOCK = 2000


@dataclass
class ExperimentConfig:
    designs: list[Design]
    p_grid: list[float]
    distribution: Distribution | None = None
    population: FinitePopulation | None = None
    rank_models: list[RankingModel] = field(default_factory=lambda: [RankingModel.perfect()])
    estimators: Sequence[str] = est.ESTIMATOR_IDS
    replicates: int = 20_000
    master_seed: int = 0
    orss_enabled: bool = True
    threads: int = 1
    block: int = DEFAULT_BLOCK
    weight_cache: WeightCache | None = None

    def __post_init__(self):
        if (self.distribution is None) == (self.population is None):
            raise ValueError("give exactly one of distribution or population")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not self.designs:
            raise ValueError("at least one design is required")
        if not self.p_grid or not all(0 < p < 1 for p in self.p_grid):
            raise ValueError("p_grid must be a nonempty list of levels in (0, 1)")
        unknown = set(self.estimators) - set(est.ESTIMATOR_IDS)
        if unknown:
            raise ValueError(f"unknown estimators: {sorted(unknown)}")
        if self.population is not None:
            too_big = [d for d in self.designs if d.k > self.population.size]
            if too_big:
                raise ValueError(f"population of {self.population.size} units is smaller than set size {too_big[0].k}")
        if self.block < 1:
            raise ValueError("block must be positive")

    @property
    def active_estimators(self) -> list[str]:
        chosen = set(self.estimators)
        if not self.orss_enabled:
            chosen -= {"orss_lf", "orss_hd"}
        return [e for e in est.ESTIMATOR_IDS if e in chosen]

    @property
    def label(self) -> str:
        return self.distribution.label if self.distribution is not None else self.population.name


@dataclass(frozen=True)
class ResultRow:
    distribution: str
    rho: str
    m: int
    k: int
    p: float
    estimator: str
    bias: float
    mse: float
    re: float
    mc_se: float

    def as_csv(self) -> list[str]:
        return [self.distribution, self.rho, str(self.m), str(self.k), repr(self.p), self.estimator,
                repr(self.bias), repr(self.mse), repr(self.re), repr(self.mc_se)]


@dataclass
class ExperimentResult:
    rows: list[ResultRow]

    def get(self, estimator: str, p: float, rho: str | None = None, m: int | None = None,
            k: int | None = None) -> ResultRow:
        for row in self.rows:
            if (row.estimator == estimator and math.isclose(row.p, p, abs_tol=1e-12)
                    and (rho is None or row.rho == rho) and (m is None or row.m == m)
                    and (k is None or row.k == k)):
                return row
        raise KeyError((estimator, p, rho, m, k))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(RESULT_HEADER)
            for row in self.rows:
                writer.writerow(row.as_csv())


def read_results_csv(path) -> ExperimentResult:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULT_HEADER:
            raise ValueError(f"{path}: expected header {','.join(RESULT_HEADER)}")
        rows = [ResultRow(r["distribution"], r["rho"], int(r["m"]), int(r["k"]), float(r["p"]), r["estimator"],
                          float(r["bias"]), float(r["mse"]), float(r["re"]), float(r["mc_se"]))
                for r in reader]
    return ExperimentResult(rows)


def rho_label(model: RankingModel | None) -> str:
    if model is None:
        return "na"
    return f"{model.effective_rho:g}"


def population_truth(pop: FinitePopulation | np.ndarray, p: float) -> float:
    """Empirical quantile of the whole population (the finite-population truth)."""
    values = pop.response if isinstance(pop, FinitePopulation) else np.asarray(pop, dtype=float)
    return est.emp_quantile_srs(est.ordered(values), p)


def _check_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d vectors of equal length")
    if x.size < 2:
        raise ValueError("need at least two pairs")
    return x, y


def spearman(x, y) -> float:
    """Spearman rank correlation using average ranks for ties."""
    x, y = _check_pair(x, y)
    rx, ry = stats.rankdata(x), stats.rankdata(y)
    return float(np.corrcoef(rx, ry)[0, 1])


def kendall(x, y) -> float:
    """Kendall tau-b."""
    x, y = _check_pair(x, y)
    return float(stats.kendalltau(x, y, variant="b").statistic)


# -- per-design evaluation plan ------------------------------------------------

@dataclass
class _LevelPlan:
    p: float
    r_p_srs: int
    r_p_pooled: int
    srs_lf: np.ndarray
    srs_hd: np.ndarray
    rss_lf: np.ndarray
    rss_hd: np.ndarray
    orss: dict[str, np.ndarray]


def _build_plans(design: Design, cfg: ExperimentConfig) -> list[_LevelPlan]:
    cache = cfg.weight_cache if cfg.weight_cache is not None else WeightCache()
    wanted = cfg.active_estimators
    plans = []
    for p in cfg.p_grid:
        n = design.n
        orss = {kind: cache.get(design, p, kind).weights for kind in ("orss_lf", "orss_hd") if kind in wanted}
        for t in est.stratum_targets(design, p):
            if t.clamped:
                log.info("design %s, p=%g: stratum %d index clamped to %d", design, p, t.r, t.j_star)
        plans.append(_LevelPlan(
            p=p,
            r_p_srs=est.QuantileTarget(n, p).r_p,
            r_p_pooled=est.QuantileTarget(n, p).r_p,
            srs_lf=est.srs_lf_weights(n, p) if n >= 2 else np.ones(1),
            srs_hd=est.srs_hd_weights(n, p),
            rss_lf=est.component_weight_matrix(design, p, "lf"),
            rss_hd=est.component_weight_matrix(design, p, "hd"),
            orss=orss,
        ))
    return plans


def _estimate(name: str, plan: _LevelPlan, srs: np.ndarray, pooled: np.ndarray) -> np.ndarray:
    if name == "srs_emp":
        return srs[:, plan.r_p_srs - 1]
    if name == "srs_lf":
        return srs @ plan.srs_lf
    if name == "srs_hd":
        return est.apply_unit_weights(srs, plan.srs_hd)
    if name == "rss_emp":
        return pooled[:, plan.r_p_pooled - 1]
    if name == "rss_lf":
        return est.combine_components(est.apply_components(pooled, plan.rss_lf, "lf"), plan.p)
    if name == "rss_hd":
        return est.combine_components(est.apply_components(pooled, plan.rss_hd, "hd"), plan.p)
    if name == "orss_lf":
        return pooled @ plan.orss[name]
    if name == "orss_hd":
        return est.apply_unit_weights(pooled, plan.orss[name])
    raise ValueError(name)


def _block_sums(cfg: ExperimentConfig, design: Design, plans, truths, reps: range):
    """Error sums for one replicate block: array [model, p, estimator, (e, e^2, e^4)]."""
    names = cfg.active_estimators
    if cfg.distribution is not None:
        srs = est.ordered(srs_batch(cfg.distribution, design.n, cfg.master_seed, reps))
        rss = rss_batch(cfg.distribution, design, cfg.rank_models, cfg.master_seed, reps)
    else:
        srs = est.ordered(population_srs_batch(cfg.population, design.n, cfg.master_seed, reps))
        rss = [population_rss_batch(cfg.population, design, cfg.master_seed, reps)]
    out = np.zeros((len(rss), len(plans), len(names), 3))
    for mi, vals in enumerate(rss):
        pooled = est.ordered(vals.reshape(len(reps), design.n))
        for pi, plan in enumerate(plans):
            for ei, name in enumerate(names):
                if mi > 0 and name.startswith("srs"):
                    out[mi, pi, ei] = out[0, pi, ei]
                    continue
                err = _estimate(name, plan, srs, pooled) - truths[pi]
                sq = err * err
                out[mi, pi, ei] = (err.sum(), sq.sum(), (sq * sq).sum())
    return out


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """MSE and relative efficiency of every configured estimator on the design grid."""
    names = cfg.active_estimators
    if "srs_emp" not in names:
        names = ["srs_emp"] + names
        cfg = _with_estimators(cfg, names)
    B = cfg.replicates
    blocks = [range(s, min(s + cfg.block, B)) for s in range(0, B, cfg.block)]
    if cfg.distribution is not None:
        truths = [float(cfg.distribution.quantile(p)) for p in cfg.p_grid]
        models = cfg.rank_models
    else:
        truths = [population_truth(cfg.population, p) for p in cfg.p_grid]
        models = [None]

    per_design = {}
    for design in cfg.designs:
        plans = _build_plans(design, cfg)
        if cfg.threads > 1:
            with ThreadPoolExecutor(cfg.threads) as pool:
                parts = list(pool.map(lambda r: _block_sums(cfg, design, plans, truths, r), blocks))
        else:
            parts = [_block_sums(cfg, design, plans, truths, r) for r in blocks]
        total = parts[0].copy()
        for part in parts[1:]:
            total += part
        per_design[design] = total

    requested = [e for e in est.ESTIMATOR_IDS if e in set(cfg.estimators) and e in names]
    rows = []
    for mi, model in enumerate(models):
        for design in cfg.designs:
            total = per_design[design]
            for pi, p in enumerate(cfg.p_grid):
                sums = total[mi, pi]
                bias = sums[:, 0] / B
                mse = sums[:, 1] / B
                var_sq = np.maximum(sums[:, 2] / B - mse * mse, 0.0)
                mc_se = np.sqrt(var_sq / B)
                ref = mse[names.index("srs_emp")]
                for name in requested:
                    ei = names.index(name)
                    re = 1.0 if name == "srs_emp" else (ref / mse[ei] if mse[ei] > 0 else math.inf)
                    rows.append(ResultRow(cfg.label, rho_label(model), design.m, design.k, p, name,
                                          float(bias[ei]), float(mse[ei]), float(re), float(mc_se[ei])))
    return ExperimentResult(rows)


def _with_estimators(cfg: ExperimentConfig, names) -> ExperimentConfig:
    from dataclasses import replace
    return replace(cfg, estimators=tuple(names))
