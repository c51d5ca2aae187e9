"""Beta density, regularized incomplete beta and finite differences.

Everything here is scalar-first; array arguments are accepted and mapped
element-wise, which is enough because estimator weights are tabulated once
per design rather than per replicate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAXITER = 10_000


@dataclass(frozen=True)
class BetaParams:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"beta shapes must be positive, got a={self.a}, b={self.b}")


def _shapes(params) -> tuple[float, float]:
    if isinstance(params, BetaParams):
        return params.a, params.b
    a, b = params
    BetaParams(a, b)
    return float(a), float(b)


def _check_unit(t: float) -> None:
    if not (0.0 <= t <= 1.0):
        raise ValueError(f"t must lie in [0, 1], got {t}")


def log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _elementwise(fn, params, t):
    if np.ndim(t) == 0:
        return fn(params, float(t))
    arr = np.asarray(t, dtype=float)
    out = np.empty_like(arr)
    for idx, v in np.ndenumerate(arr):
        out[idx] = fn(params, float(v))
    return out


def _beta_pdf_scalar(params, t: float) -> float:
    a, b = _shapes(params)
    _check_unit(t)
    if t == 0.0:
        if a < 1:
            return math.inf
        if a > 1:
            return 0.0
        return math.exp(-log_beta(a, b))
    if t == 1.0:
        if b < 1:
            return math.inf
        if b > 1:
            return 0.0
        return math.exp(-log_beta(a, b))
    return math.exp((a - 1) * math.log(t) + (b - 1) * math.log1p(-t) - log_beta(a, b))


def beta_pdf(params, t):
    """Beta(a, b) density at ``t``; endpoint limits are returned exactly."""
    return _elementwise(_beta_pdf_scalar, params, t)


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _beta_cdf_scalar(params, t: float) -> float:
    a, b = _shapes(params)
    _check_unit(t)
    if t == 0.0:
        return 0.0
    if t == 1.0:
        return 1.0
    # closed forms keep I_{1,1}(t) == t bit-exact
    if a == 1.0 and b == 1.0:
        return t
    if a == 1.0:
        return -math.expm1(b * math.log1p(-t))
    if b == 1.0:
        return math.exp(a * math.log(t))
    log_front = a * math.log(t) + b * math.log1p(-t) - log_beta(a, b)
    lower = t <= a / (a + b)
    try:
        return _cdf_branch(a, b, t, log_front, lower)
    except ArithmeticError:
        # very lopsided shapes (b ~ 1e-7) can stall one branch; the mirrored
        # expansion is exact as well and converges there
        return _cdf_branch(a, b, t, log_front, not lower)


def _cdf_branch(a: float, b: float, t: float, log_front: float, lower: bool) -> float:
    if lower:
        return math.exp(log_front) * _betacf(a, b, t) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - t) / b


def beta_cdf(params, t):
    """Regularized incomplete beta function I_{a,b}(t).

    Uses the continued fraction on whichever side of the mean ``a/(a+b)``
    converges fastest. ``t = 0`` and ``t = 1`` return exactly 0 and 1.
    """
    return _elementwise(_beta_cdf_scalar, params, t)


def beta_cdf_complement_identity_check(a: float, b: float, t: float) -> bool:
    total = beta_cdf((a, b), t) + beta_cdf((b, a), 1.0 - t)
    return abs(total - 1.0) <= 1e-12


def central_diff(
    fn: Callable[[float], float],
    t: float,
    h: float = 1e-6,
    lower: float | None = None,
    upper: float | None = None,
) -> float:
    """Second-order finite-difference derivative of ``fn`` at ``t``.

    If ``t - h`` falls below ``lower`` (or ``t + h`` above ``upper``) a
    one-sided three-point stencil of the same order is used instead, so
    ``fn`` is never evaluated outside ``[lower, upper]``.
    """
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    if lower is not None and t - h < lower:
        return (-3.0 * fn(t) + 4.0 * fn(t + h) - fn(t + 2 * h)) / (2 * h)
    if upper is not None and t + h > upper:
        return (3.0 * fn(t) - 4.0 * fn(t - h) + fn(t - 2 * h)) / (2 * h)
    return (fn(t + h) - fn(t - h)) / (2 * h)
