"""Slow, definition-level reference computations used to check the fast paths.

Nothing here imports drivebaseline; results are exact rationals where the
quantity is rational.
"""

from fractions import Fraction
import math


def ecdf_at(samples, x):
    return Fraction(sum(1 for s in samples if s <= x), len(samples))


def ks_brute(a, b):
    """max |F_a - F_b| scanned over every pooled sample value."""
    return max(abs(ecdf_at(a, x) - ecdf_at(b, x)) for x in set(a) | set(b))


def quantile_brute(samples, p):
    """Smallest sample value v with #(s <= v)/n >= p/100."""
    target = Fraction(p).limit_denominator(10**9) / 100
    for v in sorted(set(samples)):
        if ecdf_at(samples, v) >= target:
            return v
    raise AssertionError("unreachable")


def range_distance_brute(a, b, lo, hi, step=1):
    grid = list(range(lo, hi + 1, step))
    return sum(abs(quantile_brute(a, p) - quantile_brute(b, p)) for p in grid) / len(grid)


def kolmogorov_series(lam, terms=200):
    """Direct alternating-series sum 2 * sum (-1)^(k-1) exp(-2 k^2 lam^2), no truncation test."""
    import mpmath

    mpmath.mp.dps = 30
    return float(2 * mpmath.nsum(lambda k: (-1) ** (k - 1) * mpmath.exp(-2 * k**2 * lam**2), [1, mpmath.inf]))


def haversine_reference(p1, p2, radius=6_371_000.0):
    """Spherical law of cosines, a different closed form from haversine."""
    (la1, lo1), (la2, lo2) = [(math.radians(a), math.radians(b)) for a, b in (p1, p2)]
    c = math.sin(la1) * math.sin(la2) + math.cos(la1) * math.cos(la2) * math.cos(lo2 - lo1)
    return radius * math.acos(max(-1.0, min(1.0, c)))
