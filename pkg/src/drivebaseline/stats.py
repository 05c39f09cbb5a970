"""Empirical CDFs, type-1 quantiles and the two-sample Kolmogorov-Smirnov test.

All distances between distributions are computed from integer cumulative
counts where possible, so the KS statistic of two step functions is exact up
to a single final division.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

__all__ = [
    "EmpiricalCdf",
    "KsResult",
    "build_cdf",
    "merge_cdfs",
    "quantile",
    "quantiles",
    "ks_statistic",
    "kolmogorov_sf",
    "ks_pvalue",
    "range_distance",
    "percentile_grid",
]


@dataclass(frozen=True, eq=False)
class EmpiricalCdf:
    """Right-continuous step function F(x) = #(samples <= x) / n.

    ``values`` holds the distinct sample values in increasing order and
    ``counts`` how many samples sit on each of them.
    """

    values: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        counts = np.asarray(self.counts, dtype=np.int64)
        if values.ndim != 1 or values.shape != counts.shape or values.size == 0:
            raise ValidationError("EmpiricalCdf needs matching non-empty 1-d values/counts")
        if np.any(np.diff(values) <= 0):
            raise ValidationError("EmpiricalCdf values must be strictly increasing")
        if np.any(counts < 1):
            raise ValidationError("EmpiricalCdf counts must be positive")
        values.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def cum_counts(self) -> np.ndarray:
        return np.cumsum(self.counts)

    @property
    def probs(self) -> np.ndarray:
        # last entry is n / n, i.e. exactly 1.0
        return self.cum_counts / self.n

    def steps(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.probs.tolist()))

    def samples(self) -> np.ndarray:
        """The multiset of samples the function was built from, sorted."""
        return np.repeat(self.values, self.counts)

    def __call__(self, x):
        idx = np.searchsorted(self.values, x, side="right")
        cum = np.concatenate([[0], self.cum_counts])
        return cum[idx] / self.n

    def __eq__(self, other):
        if not isinstance(other, EmpiricalCdf):
            return NotImplemented
        return np.array_equal(self.values, other.values) and np.array_equal(
            self.counts, other.counts
        )

    def __hash__(self):
        return hash((self.values.tobytes(), self.counts.tobytes()))

    def __repr__(self):
        return f"EmpiricalCdf(n={self.n}, steps={self.values.size})"


@dataclass(frozen=True)
class KsResult:
    d: float
    p_value: float
    n1: int
    n2: int
    significant: bool = False
    alpha: float = 0.05


def build_cdf(samples: Iterable[float]) -> EmpiricalCdf:
    """Build the empirical CDF of ``samples``; duplicates collapse into one step.

    >>> build_cdf([3, 1, 2]).steps()
    [(1.0, 0.3333333333333333), (2.0, 0.6666666666666666), (3.0, 1.0)]
    """
    arr = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples,
                     dtype=float).ravel()
    if arr.size == 0:
        raise ValidationError("cannot build a CDF from an empty sample")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("CDF samples must be finite")
    values, counts = np.unique(arr, return_counts=True)
    return EmpiricalCdf(values, counts)


def merge_cdfs(cdfs: Sequence[EmpiricalCdf]) -> EmpiricalCdf:
    """Pool the underlying samples of several CDFs into one."""
    if not cdfs:
        raise ValidationError("nothing to merge")
    values = np.concatenate([c.values for c in cdfs])
    counts = np.concatenate([c.counts for c in cdfs])
    uniq, inverse = np.unique(values, return_inverse=True)
    pooled = np.zeros(uniq.size, dtype=np.int64)
    np.add.at(pooled, inverse, counts)
    return EmpiricalCdf(uniq, pooled)


def _check_percent(p):
    p = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(p)) or np.any(p <= 0) or np.any(p > 100):
        raise ValidationError(f"percentile must lie in (0, 100], got {p.tolist()}")
    return p


def quantiles(cdf: EmpiricalCdf, p) -> np.ndarray:
    """Vectorised left-continuous inverse: smallest v with F(v) >= p/100."""
    p = _check_percent(p)
    # compare 100*cum >= p*n to avoid rounding in cum/n
    idx = np.searchsorted(cdf.cum_counts * 100.0, p * cdf.n, side="left")
    return cdf.values[np.minimum(idx, cdf.values.size - 1)]


def quantile(cdf: EmpiricalCdf, p: float) -> float:
    return float(quantiles(cdf, p))


def _ks_on_grid(cum_a, n_a, cum_b, n_b) -> float:
    # |ca/na - cb/nb| maximised in integers, divided once
    gap = np.abs(cum_a * n_b - cum_b * n_a).max()
    return float(gap) / float(n_a * n_b)


def ks_statistic(a: EmpiricalCdf, b: EmpiricalCdf) -> float:
    """Largest vertical gap between two empirical CDFs."""
    grid = np.union1d(a.values, b.values)
    cum_a = np.concatenate([[0], a.cum_counts])[np.searchsorted(a.values, grid, side="right")]
    cum_b = np.concatenate([[0], b.cum_counts])[np.searchsorted(b.values, grid, side="right")]
    return _ks_on_grid(cum_a, a.n, cum_b, b.n)


def kolmogorov_sf(lam: float, tol: float = 1e-12) -> float:
    """Survival function of the Kolmogorov distribution,
    Q(lam) = 2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lam^2).

    The alternating series converges slowly for small ``lam``; there the
    equivalent theta-function form is summed instead.
    """
    if lam <= 0:
        return 1.0
    if lam < 1.0:
        # 1 - sqrt(2 pi)/lam * sum exp(-(2k-1)^2 pi^2 / (8 lam^2))
        total = 0.0
        k = 1
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8 * lam * lam))
            total += term
            if term < tol:
                break
            k += 1
        q = 1.0 - math.sqrt(2 * math.pi) / lam * total
    else:
        total = 0.0
        k = 1
        while True:
            term = math.exp(-2.0 * k * k * lam * lam)
            total += term if k % 2 else -term
            if term < tol:
                break
            k += 1
        q = 2.0 * total
    return min(1.0, max(0.0, q))


def ks_pvalue(d: float, n1: int, n2: int) -> float:
    """Asymptotic two-sample p-value with the usual small-sample correction."""
    if not 0.0 <= d <= 1.0:
        raise ValidationError(f"KS statistic must lie in [0, 1], got {d}")
    if n1 < 1 or n2 < 1:
        raise ValidationError("sample counts must be >= 1")
    if d == 0:
        return 1.0
    ne = n1 * n2 / (n1 + n2)
    sq = math.sqrt(ne)
    lam = (sq + 0.12 + 0.11 / sq) * d
    return kolmogorov_sf(lam)


def percentile_grid(lo: int, hi: int, step: int = 1) -> np.ndarray:
    if not (isinstance(lo, (int, np.integer)) and isinstance(hi, (int, np.integer))):
        raise ValidationError("percentile bounds must be integers")
    if not 1 <= lo < hi <= 99:
        raise ValidationError(f"need 1 <= lo < hi <= 99, got lo={lo} hi={hi}")
    if step < 1:
        raise ValidationError(f"grid step must be >= 1, got {step}")
    return np.arange(lo, hi + 1, step)


def range_distance(a: EmpiricalCdf, b: EmpiricalCdf, lo: int, hi: int, step: int = 1) -> float:
    """Mean absolute quantile gap between ``a`` and ``b`` over percentiles
    lo, lo+step, ..., <= hi."""
    grid = percentile_grid(lo, hi, step)
    return float(np.mean(np.abs(quantiles(a, grid) - quantiles(b, grid))))
