import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rssquant import estimators as E
from rssquant import harness as H
from rssquant.distributions import Exponential, Normal
from rssquant.harness import ExperimentConfig, run_experiment
from rssquant.orss import WeightCache
from rssquant.sampler import Design, FinitePopulation, RankingModel, SeedSpec, concomitant_pairs, rss_batch, srs_batch

N01 = Normal(0, 1)


def small_config(**kw):
    base = dict(designs=[Design(3, 2)], p_grid=[0.25, 0.5], distribution=N01, replicates=600, master_seed=3,
                block=250, weight_cache=WeightCache(None))
    base.update(kw)
    return ExperimentConfig(**base)


def test_row_layout_and_reference():
    res = run_experiment(small_config(rank_models=[RankingModel.perfect(), RankingModel.concomitant(0.5)]))
    assert len(res.rows) == 2 * 2 * 8
    assert [r.estimator for r in res.rows[:8]] == list(E.ESTIMATOR_IDS)
    assert [r.rho for r in res.rows[::16]] == ["1", "0.5"]
    assert all(r.re == 1.0 for r in res.rows if r.estimator == "srs_emp")
    srs_perfect = [r.mse for r in res.rows if r.rho == "1" and r.estimator.startswith("srs")]
    srs_weak = [r.mse for r in res.rows if r.rho == "0.5" and r.estimator.startswith("srs")]
    assert srs_perfect == srs_weak


def test_deterministic_across_threads_and_blocks_order():
    a = run_experiment(small_config(threads=1))
    b = run_experiment(small_config(threads=4))
    assert a.rows == b.rows


def test_single_replicate_mse_is_squared_error():
    cfg = small_config(replicates=1, p_grid=[0.5], estimators=["srs_emp", "rss_hd"])
    res = run_experiment(cfg)
    srs = E.ordered(srs_batch(N01, 6, 3, [0]))[0]
    (rss,) = rss_batch(N01, Design(3, 2), [RankingModel.perfect()], 3, [0])
    pooled = E.ordered(rss[0].ravel())
    truth = float(N01.quantile(0.5))
    assert res.get("srs_emp", 0.5).mse == pytest.approx((E.emp_quantile_srs(srs, 0.5) - truth) ** 2, rel=1e-14)
    assert res.get("rss_hd", 0.5).mse == pytest.approx((E.rss_hd(pooled, 0.5, Design(3, 2)) - truth) ** 2,
                                                        rel=1e-12)
    assert res.get("rss_hd", 0.5).mc_se == 0.0


def test_srs_emp_only_gives_unit_re():
    res = run_experiment(small_config(estimators=["srs_emp"]))
    assert {r.re for r in res.rows} == {1.0}
    assert len(res.rows) == 2


def test_orss_can_be_disabled():
    res = run_experiment(small_config(orss_enabled=False))
    assert not any(r.estimator.startswith("orss") for r in res.rows)


def test_csv_round_trip(tmp_path):
    res = run_experiment(small_config())
    path = tmp_path / "r.csv"
    res.write_csv(path)
    assert path.read_text().splitlines()[0] == ",".join(H.RESULT_HEADER)
    assert H.read_results_csv(path).rows == res.rows


def test_config_validation():
    with pytest.raises(ValueError):
        small_config(distribution=None)
    with pytest.raises(ValueError):
        small_config(population=FinitePopulation([1.0, 2.0], [1.0, 2.0]))
    with pytest.raises(ValueError):
        small_config(p_grid=[0.0])
    with pytest.raises(ValueError):
        small_config(estimators=["bogus"])
    with pytest.raises(ValueError):
        small_config(replicates=0)


def test_population_truth():
    pop = np.arange(1.0, 101.0)
    assert H.population_truth(pop, 0.5) == 50
    assert H.population_truth(pop, 0.25) == 25
    assert H.population_truth(np.full(7, 2.5), 0.9) == 2.5


def test_population_study_ranker_information():
    rng = np.random.default_rng(11)
    y = rng.lognormal(size=800)
    noise = rng.normal(size=800)

    def run(ranker):
        pop = FinitePopulation(y, ranker, name="y")
        cfg = ExperimentConfig(designs=[Design(5, 3)], p_grid=[0.5], population=pop, replicates=3000,
                               master_seed=2, estimators=["srs_emp", "rss_emp", "rss_hd"],
                               weight_cache=WeightCache(None))
        return run_experiment(cfg)

    perfect, blind = run(y), run(noise)
    for name in ("rss_emp", "rss_hd"):
        assert perfect.get(name, 0.5).re >= blind.get(name, 0.5).re
    assert perfect.rows[0].rho == "na"


def test_spearman_and_kendall():
    x = np.array([3.0, 1.0, 4.0, 1.5, 5.0])
    assert H.spearman(x, x) == pytest.approx(1.0)
    assert H.spearman(x, -x) == pytest.approx(-1.0)
    assert H.spearman([1, 2, 3, 4], [1, 2, 4, 3]) == pytest.approx(0.8)
    assert H.kendall(x, x) == pytest.approx(1.0)
    assert H.spearman([1, 1, 2, 3], [1, 2, 3, 4]) == pytest.approx(0.9486832980505138)
    with pytest.raises(ValueError):
        H.spearman([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        H.kendall([1], [1])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-1000, 1000), min_size=3, max_size=30, unique=True))
def test_spearman_invariant_under_monotone_maps(x):
    x = np.array(x, dtype=float)
    y = np.arange(x.size)[np.argsort(np.argsort(x))]
    assert H.spearman(x, x ** 3 + 7) == pytest.approx(1.0)
    assert H.spearman(x, y) == pytest.approx(1.0)


def test_pooled_edf_unbiased_under_imperfect_ranking():
    design, p = Design(5, 3), 0.3
    zeta = float(N01.quantile(p))
    (vals,) = rss_batch(N01, design, [RankingModel.concomitant(0.5)], 17, range(20_000))
    edf = (vals.reshape(20_000, -1) <= zeta).mean(axis=1)
    se = edf.std(ddof=1) / np.sqrt(edf.size)
    assert abs(edf.mean() - p) <= 3 * se


def test_kendall_calibration_smoke():
    y, x = concomitant_pairs(N01, 0.75, 20_000, SeedSpec(5))
    assert H.kendall(y, x) == pytest.approx(2 / np.pi * np.arcsin(0.75), abs=0.02)


def test_exponential_runs_with_cache(tmp_path):
    cfg = ExperimentConfig(designs=[Design(2, 3)], p_grid=[0.4], distribution=Exponential(1), replicates=200,
                           weight_cache=WeightCache(tmp_path))
    res = run_experiment(cfg)
    assert np.isfinite([r.re for r in res.rows]).all()
    assert len(list(tmp_path.glob("*.csv"))) == 2
