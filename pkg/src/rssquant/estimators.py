"""Quantile L-estimators for simple random and ranked set samples.

All estimators are linear in the sorted sample, so each one is split into a
weight builder (depends on design and p only) and a cheap application step.
The application functions accept a single sorted sample of shape ``(n,)`` or
a batch of sorted samples of shape ``(B, n)``.

Estimator ids used throughout: srs_emp, srs_lf, srs_hd, rss_emp, rss_lf,
rss_hd, orss_lf, orss_hd.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from . import specfun
from .sampler import Design, RssSample

if TYPE_CHECKING:
    from .orss import WeightTable

ESTIMATOR_IDS = ("srs_emp", "srs_lf", "srs_hd", "rss_emp", "rss_lf", "rss_hd", "orss_lf", "orss_hd")

# products like n*p are snapped to the nearest integer within this slack so
# that e.g. 0.7*10 is treated as the integer 7
_SNAP = 1e-9


def _snap_floor(x: float) -> int:
    r = round(x)
    return int(r) if abs(x - r) <= _SNAP else math.floor(x)


def _is_integral(x: float) -> bool:
    return abs(x - round(x)) <= _SNAP


def _check_p(p: float) -> None:
    if not (0.0 < p < 1.0):
        raise ValueError(f"quantile level must lie in (0, 1), got {p}")


def ordered(values) -> np.ndarray:
    """Stable ascending sort along the last axis."""
    return np.sort(np.asarray(values, dtype=float), axis=-1, kind="stable")


@dataclass(frozen=True)
class QuantileTarget:
    n: int
    p: float

    def __post_init__(self):
        _check_p(self.p)
        if self.n < 1:
            raise ValueError("sample size must be positive")

    @property
    def r_p(self) -> int:
        """Index of the empirical quantile order statistic (1-based)."""
        np_ = self.n * self.p
        r = int(round(np_)) if _is_integral(np_) else math.floor(np_) + 1
        return min(max(r, 1), self.n)

    @property
    def j_star_raw(self) -> int:
        return _snap_floor((self.n + 1) * self.p)

    @property
    def j_star(self) -> int:
        return min(max(self.j_star_raw, 1), self.n)

    @property
    def clamped(self) -> bool:
        return self.j_star != self.j_star_raw


def _apply(s, w) -> np.ndarray | float:
    s = np.asarray(s, dtype=float)
    if s.shape[-1] != np.shape(w)[0]:
        raise ValueError(f"sample length {s.shape[-1]} does not match {np.shape(w)[0]} weights")
    out = s @ w
    return float(out) if np.ndim(out) == 0 else out


def apply_unit_weights(s, w) -> np.ndarray | float:
    """Weighted sum for unit-mass weights, anchored at the heaviest index.

    Computed as ``s[a] + sum(w * (s - s[a]))`` so a constant sample is
    returned bit for bit; any residual weight mass (quadrature slack) lands
    on the anchor.
    """
    s = np.asarray(s, dtype=float)
    w = np.asarray(w, dtype=float)
    if s.shape[-1] != w.shape[0]:
        raise ValueError(f"sample length {s.shape[-1]} does not match {w.shape[0]} weights")
    a = int(np.argmax(w))
    anchor = s[..., a]
    out = anchor + (s - anchor[..., None]) @ w
    return float(out) if np.ndim(out) == 0 else out


def _pick(s, idx: int):
    s = np.asarray(s, dtype=float)
    out = s[..., idx - 1]
    return float(out) if np.ndim(out) == 0 else out


def emp_quantile_srs(s, p: float):
    """Y_(np) when np is an integer, otherwise Y_(floor(np)+1)."""
    s = np.asarray(s)
    return _pick(s, QuantileTarget(s.shape[-1], p).r_p)


def emp_quantile_pooled(s, p: float):
    """Pooled RSS empirical quantile: generalized inverse of the pooled EDF."""
    return emp_quantile_srs(s, p)


def srs_lf_weights(n: int, p: float, normalize: bool = False) -> np.ndarray:
    t = QuantileTarget(n, p)
    j = t.j_star
    grid = np.arange(1, n + 1) / n
    w = specfun.beta_pdf((j, n - j + 1), grid) / n
    return w / w.sum() if normalize else w


def srs_hd_weights(n: int, p: float) -> np.ndarray:
    QuantileTarget(n, p)
    a, b = (n + 1) * p, (n + 1) * (1 - p)
    cdf = specfun.beta_cdf((a, b), np.arange(n + 1) / n)
    return np.diff(cdf)


def lf_srs(s, p: float, normalize: bool = False):
    """LF estimator: Beta-density weights evaluated at i/n.

    The weights are used as is (their sum is only approximately 1) unless
    ``normalize`` is set.
    """
    n = np.shape(s)[-1]
    if n < 2:
        raise ValueError("lf_srs needs at least two observations")
    return _apply(s, srs_lf_weights(n, p, normalize))


def hd_srs(s, p: float):
    """HD estimator: weights are increments of the Beta((n+1)p, (n+1)(1-p)) cdf over [(i-1)/n, i/n]."""
    return apply_unit_weights(s, srs_hd_weights(np.shape(s)[-1], p))


@dataclass(frozen=True)
class StratumTarget:
    r: int
    k: int
    m: int
    p: float
    p_r: float

    @property
    def a(self) -> float:
        return (self.m + 1) * self.p_r

    @property
    def b(self) -> float:
        return (self.m + 1) * (1 - self.p_r)

    @property
    def j_star_raw(self) -> int:
        return _snap_floor((self.m + 1) * self.p_r)

    @property
    def j_star(self) -> int:
        return min(max(self.j_star_raw, 1), self.m)

    @property
    def clamped(self) -> bool:
        return self.j_star != self.j_star_raw

    def transform(self, u):
        """g_r(u) = I_{r, k-r+1}(u)."""
        return specfun.beta_cdf((self.r, self.k - self.r + 1), u)

    def transform_deriv(self, u):
        return specfun.beta_pdf((self.r, self.k - self.r + 1), u)


def stratum_targets(design: Design, p: float) -> list[StratumTarget]:
    _check_p(p)
    k = design.k
    return [StratumTarget(r, k, design.m, p, specfun.beta_cdf((r, k - r + 1), p)) for r in range(1, k + 1)]


def pooled_lf_weights(design: Design, t: StratumTarget, normalize: bool = False) -> np.ndarray:
    n, m = design.n, design.m
    u = np.arange(1, n + 1) / n
    j = t.j_star
    psi = specfun.beta_pdf((j, m - j + 1), t.transform(u)) * t.transform_deriv(u)
    w = psi / n
    return w / w.sum() if normalize else w


def pooled_hd_weights(design: Design, t: StratumTarget) -> np.ndarray:
    u = np.arange(design.n + 1) / design.n
    return np.diff(specfun.beta_cdf((t.a, t.b), t.transform(u)))


def _check_design(s, design: Design) -> None:
    if np.shape(s)[-1] != design.n:
        raise ValueError(f"pooled sample has {np.shape(s)[-1]} values but the design needs n={design.n}")


def pooled_lf_component(s, design: Design, t: StratumTarget, normalize: bool = False):
    _check_design(s, design)
    return _apply(s, pooled_lf_weights(design, t, normalize))


def pooled_hd_component(s, design: Design, t: StratumTarget):
    _check_design(s, design)
    return apply_unit_weights(s, pooled_hd_weights(design, t))


def combine_components(c, p: float):
    """Interpolate between the sorted per-stratum estimates.

    ``c`` has the k component estimates on its last axis. The interpolation
    is written as ``lo + w * (hi - lo)`` so equal components pass through
    unchanged.
    """
    c = np.sort(np.asarray(c, dtype=float), axis=-1)
    k = c.shape[-1]
    x = (k - 1) * p
    ell = _snap_floor(x) + 1
    w = max(x - (ell - 1), 0.0)
    if ell >= k:
        out = c[..., k - 1]
    else:
        lo = c[..., ell - 1]
        out = lo + w * (c[..., ell] - lo)
    return float(out) if np.ndim(out) == 0 else out


def component_weight_matrix(design: Design, p: float, kind: str, normalize: bool = False) -> np.ndarray:
    """(n, k) matrix whose column r holds the weights of stratum component r."""
    targets = stratum_targets(design, p)
    if kind == "lf":
        cols = [pooled_lf_weights(design, t, normalize) for t in targets]
    elif kind == "hd":
        cols = [pooled_hd_weights(design, t) for t in targets]
    else:
        raise ValueError(f"component kind must be 'lf' or 'hd', got {kind!r}")
    return np.column_stack(cols)


def _pooled(s, design: Design | None):
    if isinstance(s, RssSample):
        return s.pooled(), s.design
    if design is None:
        raise ValueError("design is required when passing a pooled array")
    _check_design(s, design)
    return np.asarray(s, dtype=float), design


def component_estimates(pooled, design: Design, p: float, kind: str, normalize: bool = False) -> np.ndarray:
    """The k pooled transformed-scale estimates, stacked on the last axis."""
    _check_design(pooled, design)
    return apply_components(pooled, component_weight_matrix(design, p, kind, normalize), kind)


def apply_components(pooled, W: np.ndarray, kind: str) -> np.ndarray:
    apply = _apply if kind == "lf" else apply_unit_weights
    return np.stack([np.asarray(apply(pooled, W[:, r])) for r in range(W.shape[1])], axis=-1)


def _rss_combined(s, p, kind, design, normalize=False):
    pooled, design = _pooled(s, design)
    return combine_components(component_estimates(pooled, design, p, kind, normalize), p)


def rss_lf(s, p: float, design: Design | None = None, normalize: bool = False):
    """Pooled transformed-scale LF estimator combined across strata.

    ``s`` is an RssSample or a sorted pooled array (single or batch) with its
    design.
    """
    return _rss_combined(s, p, "lf", design, normalize)


def rss_hd(s, p: float, design: Design | None = None):
    return _rss_combined(s, p, "hd", design)


def rss_emp(s, p: float):
    pooled, _ = _pooled(s, None) if isinstance(s, RssSample) else (s, None)
    return emp_quantile_pooled(pooled, p)


def _orss_apply(s, w: "WeightTable", kind: str):
    if w.kind != kind:
        raise ValueError(f"expected a {kind} weight table, got {w.kind}")
    return _apply(s, w.weights) if kind == "orss_lf" else apply_unit_weights(s, w.weights)


def orss_lf(s, w: "WeightTable"):
    return _orss_apply(s, w, "orss_lf")


def orss_hd(s, w: "WeightTable"):
    return _orss_apply(s, w, "orss_hd")
