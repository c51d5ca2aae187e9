import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from rssquant import distributions as D
from rssquant.distributions import Exponential, Normal, StratumLaw, Weibull, parse_distribution

N01, EXP1, WB21 = Normal(0, 1), Exponential(1), Weibull(2, 1)


def test_pdf_values():
    assert D.pdf(N01, 0.0) == pytest.approx(0.3989422804, abs=1e-9)
    assert D.pdf(EXP1, 0.0) == 1.0
    assert D.pdf(WB21, 0.0) == 0.0


def test_cdf_values():
    assert D.cdf(N01, 0.0) == 0.5
    assert D.cdf(EXP1, math.log(2)) == pytest.approx(0.5, abs=1e-15)
    assert D.cdf(WB21, 1.0) == pytest.approx(1 - math.exp(-1), abs=1e-15)


def test_quantile_values():
    assert D.quantile(N01, 0.5) == pytest.approx(0.0, abs=1e-15)
    assert D.quantile(EXP1, 0.9) == pytest.approx(math.log(10), rel=1e-14)
    assert D.quantile(WB21, 0.5) == pytest.approx(math.sqrt(math.log(2)), rel=1e-14)


def test_mean_sd():
    assert D.mean_sd(N01) == (0.0, 1.0)
    assert D.mean_sd(EXP1) == (1.0, 1.0)
    mu, sd = D.mean_sd(WB21)
    assert mu == pytest.approx(math.gamma(1.5), rel=1e-14)
    assert sd == pytest.approx(0.463251, abs=1e-6)


def test_normal_quantile_matches_scipy_in_tails():
    p = np.array([1e-12, 1e-6, 0.01, 0.3, 0.7, 0.99, 1 - 1e-9])
    assert np.allclose(N01.quantile(p), stats.norm.ppf(p), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("d", [N01, EXP1, WB21, Normal(3, 2), Exponential(0.5), Weibull(1.5, 2)])
def test_quantile_inverts_cdf(d):
    p = np.linspace(0.01, 0.99, 37)
    assert np.allclose(d.cdf(d.quantile(p)), p, atol=1e-13)


def test_quantile_rejects_bad_levels():
    for p in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            N01.quantile(p)


@pytest.mark.parametrize("text,expected", [
    ("normal:0,1", N01), ("exp:1", EXP1), ("weibull:2,1", WB21), ("Normal:2.5,0.5", Normal(2.5, 0.5)),
])
def test_parse_distribution(text, expected):
    assert parse_distribution(text) == expected


@pytest.mark.parametrize("text", ["gamma:1", "normal:0", "exp:x", "normal:0,-1", "exp:0"])
def test_parse_distribution_errors(text):
    with pytest.raises(ValueError):
        parse_distribution(text)


def test_spec_round_trip():
    for d in (N01, EXP1, WB21, Normal(1.5, 0.25)):
        assert parse_distribution(d.spec) == d


def test_stratum_cdf():
    for y in (-1.0, 0.3, 2.0):
        assert D.stratum_cdf(StratumLaw(N01, 1, 1), y) == pytest.approx(float(N01.cdf(y)), abs=1e-15)
    assert D.stratum_cdf(StratumLaw(N01, 1, 3), 0.0) == pytest.approx(0.875)
    assert D.stratum_cdf(StratumLaw(N01, 3, 3), 0.0) == pytest.approx(0.125)
    with pytest.raises(ValueError):
        StratumLaw(N01, 4, 3)


def test_stratum_pdf_integrates_to_one():
    from scipy import integrate
    for r in (1, 2, 3):
        val, _ = integrate.quad(lambda y: StratumLaw(EXP1, r, 3).pdf(y), 0, np.inf)
        assert val == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 7), st.floats(-3, 3))
def test_stratum_mixture_recovers_parent(k, y):
    avg = sum(StratumLaw(N01, r, k).cdf(y) for r in range(1, k + 1)) / k
    assert avg == pytest.approx(float(N01.cdf(y)), abs=1e-13)
