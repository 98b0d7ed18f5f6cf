"""Statistical primitives for smoothed certification.

Gaussian quantile, chi-square quantile, Goodman simultaneous multinomial
intervals (with small-class coalescing) and Gumbel-Softmax sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)

# Acklam's rational approximation coefficients.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425

META_CLASS = -1


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / SQRT2)


def normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / SQRT2PI


def _lower_quantile(p: float) -> float:
    # valid for 0 < p <= 0.5
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    else:
        q = p - 0.5
        r = q * q
        x = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
             / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))
    # Halley refinement against erfc; one pass takes ~1e-9 to ~1e-15
    for _ in range(2):
        e = 0.5 * math.erfc(-x / SQRT2) - p
        u = e * SQRT2PI * math.exp(0.5 * x * x)
        x = x - u / (1.0 + 0.5 * x * u)
    return x


def normal_quantile(p: float) -> float:
    """Inverse of the standard normal CDF.

    Raises ``ValueError`` outside the open interval (0, 1). The upper half is
    computed by reflection so that ``q(p) == -q(1 - p)`` to rounding.
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"normal_quantile needs 0 < p < 1, got {p!r}")
    if p > 0.5:
        return -_lower_quantile(1.0 - p)
    return _lower_quantile(p)


def _gamma_series(a: float, x: float) -> float:
    total = term = 1.0 / a
    ap = a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cont_frac(a: float, x: float) -> float:
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_gamma_p(a: float, x: float) -> float:
    """Lower regularized incomplete gamma P(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cont_frac(a, x)


@lru_cache(maxsize=256)
def chi2_quantile(p: float, df: float) -> float:
    """Chi-square quantile by bisection on the regularized incomplete gamma."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"chi2_quantile needs 0 < p < 1, got {p!r}")
    if df <= 0:
        raise ValueError("df must be positive")
    a = 0.5 * df
    lo, hi = 0.0, max(1.0, df)
    while regularized_gamma_p(a, 0.5 * hi) < p:
        lo, hi = hi, hi * 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if regularized_gamma_p(a, 0.5 * mid) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


@dataclass
class ClassCounts:
    """Per-class sample counts out of ``total`` Monte-Carlo draws.

    ``classes`` maps each entry of ``counts`` back to an original class index;
    ``META_CLASS`` marks the coalesced meta-class. After coalescing, the meta
    count may be padded up to the threshold, so ``sum(counts)`` can exceed
    ``total`` by less than the threshold.
    """

    counts: np.ndarray
    total: int
    classes: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 1 or self.counts.size < 2:
            raise ValueError("need a vector of at least two class counts")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        self.total = int(self.total)
        if self.total <= 0:
            raise ValueError("total must be positive")
        if self.classes is None:
            if int(self.counts.sum()) != self.total:
                raise ValueError("counts must sum to total")
            self.classes = np.arange(self.counts.size)
        else:
            self.classes = np.asarray(self.classes, dtype=np.int64)

    @classmethod
    def from_counts(cls, counts) -> "ClassCounts":
        counts = np.asarray(counts, dtype=np.int64)
        return cls(counts, int(counts.sum()))

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.total


@dataclass(frozen=True)
class ExpectationBounds:
    top_class: int
    runner_class: int
    e0_lower: float
    e1_upper: float
    alpha: float
    z0: float = float("nan")
    z1: float = float("nan")


def coalesce_classes(counts: ClassCounts, threshold: int = 5) -> ClassCounts:
    """Merge every class with fewer than ``threshold`` hits into one meta-class.

    The meta-class goes last with count ``max(threshold, sum of merged)``.
    Returns ``counts`` unchanged when no class is below the threshold.
    """
    small = counts.counts < threshold
    if not small.any():
        return counts
    keep = ~small
    if not keep.any():
        raise ValueError(f"no class reaches {threshold} hits; draw more samples")
    merged = int(counts.counts[small].sum())
    new_counts = np.append(counts.counts[keep], max(threshold, merged))
    new_classes = np.append(counts.classes[keep], META_CLASS)
    return ClassCounts(new_counts, counts.total, new_classes)


def goodman_bounds(counts: ClassCounts, alpha: float) -> np.ndarray:
    """Goodman (1965) simultaneous intervals, shape ``(k, 2)`` of (lower, upper)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    y = counts.counts.astype(float)
    if np.any(y < 5):
        raise ValueError("Goodman intervals need every count >= 5; run coalesce_classes first")
    n = float(counts.total)
    k = y.size
    a = chi2_quantile(1.0 - alpha / k, 1.0)
    centre = a + 2.0 * y
    spread = np.sqrt(a * (a + 4.0 * y * (n - y) / n))
    denom = 2.0 * (n + a)
    lower = np.clip((centre - spread) / denom, 0.0, 1.0)
    upper = np.clip((centre + spread) / denom, 0.0, 1.0)
    return np.stack([lower, upper], axis=1)


def gumbel_softmax(logits, tau: float, u) -> np.ndarray:
    """softmax((logits + g) / tau) with g = -log(-log u). Works on the last axis."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    logits = np.asarray(logits, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ValueError("uniform draws must lie strictly inside (0, 1)")
    z = (logits - np.log(-np.log(u))) / tau
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
