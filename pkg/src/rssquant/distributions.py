"""Parent distributions and the rank-stratum laws they induce.

Each distribution exposes vectorised ``pdf``, ``cdf`` and ``quantile`` plus
analytic ``mean_sd``. New laws can be plugged in via ``CustomDistribution``
without touching the rest of the package.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ndtr, ndtri

from . import specfun

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _check_level(p) -> None:
    arr = np.asarray(p)
    if not np.all((arr > 0) & (arr < 1)):
        raise ValueError(f"quantile level must lie in (0, 1), got {p}")


def _scalarize(x, out):
    return float(out) if np.ndim(x) == 0 else out


class Distribution:
    """Base class: subclasses provide pdf, cdf, quantile and mean_sd."""

    spec: str = ""

    def pdf(self, y):
        raise NotImplementedError

    def cdf(self, y):
        raise NotImplementedError

    def quantile(self, p):
        raise NotImplementedError

    def mean_sd(self) -> tuple[float, float]:
        raise NotImplementedError

    @property
    def label(self) -> str:
        return self.spec


@dataclass(frozen=True)
class Normal(Distribution):
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not self.sd > 0:
            raise ValueError("normal sd must be positive")

    @property
    def spec(self) -> str:
        return f"normal:{self.mean:g},{self.sd:g}"

    def pdf(self, y):
        z = (np.asarray(y, dtype=float) - self.mean) / self.sd
        return _scalarize(y, np.exp(-0.5 * z * z) / (_SQRT_2PI * self.sd))

    def cdf(self, y):
        z = (np.asarray(y, dtype=float) - self.mean) / self.sd
        return _scalarize(y, ndtr(z))

    def quantile(self, p):
        _check_level(p)
        z = ndtri(np.asarray(p, dtype=float))
        return _scalarize(p, self.mean + self.sd * z)

    def mean_sd(self):
        return float(self.mean), float(self.sd)


@dataclass(frozen=True)
class Exponential(Distribution):
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("exponential rate must be positive")

    @property
    def spec(self) -> str:
        return f"exp:{self.rate:g}"

    def pdf(self, y):
        y = np.asarray(y, dtype=float)
        out = np.where(y >= 0, self.rate * np.exp(-self.rate * np.maximum(y, 0.0)), 0.0)
        return _scalarize(y, out)

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        return _scalarize(y, np.where(y > 0, -np.expm1(-self.rate * np.maximum(y, 0.0)), 0.0))

    def quantile(self, p):
        _check_level(p)
        return _scalarize(p, -np.log1p(-np.asarray(p, dtype=float)) / self.rate)

    def mean_sd(self):
        return 1.0 / self.rate, 1.0 / self.rate


@dataclass(frozen=True)
class Weibull(Distribution):
    shape: float = 2.0
    scale: float = 1.0

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError("weibull shape and scale must be positive")

    @property
    def spec(self) -> str:
        return f"weibull:{self.shape:g},{self.scale:g}"

    def pdf(self, y):
        y = np.asarray(y, dtype=float)
        z = np.maximum(y, 0.0) / self.scale
        with np.errstate(divide="ignore"):
            dens = (self.shape / self.scale) * z ** (self.shape - 1) * np.exp(-(z ** self.shape))
        return _scalarize(y, np.where(y >= 0, dens, 0.0))

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        z = np.maximum(y, 0.0) / self.scale
        return _scalarize(y, np.where(y > 0, -np.expm1(-(z ** self.shape)), 0.0))

    def quantile(self, p):
        _check_level(p)
        p = np.asarray(p, dtype=float)
        return _scalarize(p, self.scale * (-np.log1p(-p)) ** (1.0 / self.shape))

    def mean_sd(self):
        g1 = math.gamma(1 + 1 / self.shape)
        g2 = math.gamma(1 + 2 / self.shape)
        return self.scale * g1, self.scale * math.sqrt(g2 - g1 * g1)


@dataclass(frozen=True)
class CustomDistribution(Distribution):
    """User-supplied law; all five callables must be vectorised."""

    name: str
    pdf_fn: Callable = field(repr=False)
    cdf_fn: Callable = field(repr=False)
    quantile_fn: Callable = field(repr=False)
    mean: float = 0.0
    sd: float = 1.0

    @property
    def spec(self) -> str:
        return self.name

    def pdf(self, y):
        return self.pdf_fn(y)

    def cdf(self, y):
        return self.cdf_fn(y)

    def quantile(self, p):
        _check_level(p)
        return self.quantile_fn(p)

    def mean_sd(self):
        return float(self.mean), float(self.sd)


def pdf(d: Distribution, y):
    return d.pdf(y)


def cdf(d: Distribution, y):
    return d.cdf(y)


def quantile(d: Distribution, p):
    return d.quantile(p)


def mean_sd(d: Distribution) -> tuple[float, float]:
    return d.mean_sd()


def parse_distribution(text: str) -> Distribution:
    """Parse ``normal:mean,sd``, ``exp:rate`` or ``weibull:shape,scale``."""
    kind, _, rest = text.strip().partition(":")
    kind = kind.lower()
    try:
        args = [float(v) for v in rest.split(",")] if rest else []
    except ValueError:
        raise ValueError(f"bad distribution parameters in {text!r}") from None
    makers = {"normal": (Normal, 2), "exp": (Exponential, 1), "weibull": (Weibull, 2)}
    if kind not in makers:
        raise ValueError(f"unknown distribution {kind!r}; expected normal, exp or weibull")
    cls, nargs = makers[kind]
    if len(args) != nargs:
        raise ValueError(f"{kind} takes {nargs} parameter(s), got {len(args)} in {text!r}")
    return cls(*args)


@dataclass(frozen=True)
class StratumLaw:
    """Law of the r-th order statistic out of a set of ``set_size`` units."""

    parent: Distribution
    rank: int
    set_size: int

    def __post_init__(self):
        if not (1 <= self.rank <= self.set_size):
            raise ValueError(f"rank must lie in 1..{self.set_size}, got {self.rank}")

    @property
    def beta(self) -> specfun.BetaParams:
        return specfun.BetaParams(self.rank, self.set_size - self.rank + 1)

    def cdf(self, y):
        return specfun.beta_cdf(self.beta, self.parent.cdf(y))

    def pdf(self, y):
        return specfun.beta_pdf(self.beta, self.parent.cdf(y)) * self.parent.pdf(y)


def stratum_cdf(s: StratumLaw, y):
    return s.cdf(y)
