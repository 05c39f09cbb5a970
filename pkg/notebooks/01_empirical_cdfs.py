# ---
# jupyter:
#   jupytext:
#     formats: ipynb,py:light
#     text_representation:
#       extension: .py
#       format_name: light
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# # Empirical CDFs, the KS distance and percentile ranges
#
# Two small speed samples, their step functions and the distances the rest
# of the package is built on.

import numpy as np

from drivebaseline.stats import build_cdf, ks_pvalue, ks_statistic, quantiles, range_distance

rng = np.random.default_rng(0)
senior = build_cdf(rng.normal(72, 2, 400).round(1))
young = build_cdf(rng.normal(76, 4, 400).round(1))
senior.steps()[:5]

# Quantiles are left-continuous: the smallest observed value whose
# cumulative fraction reaches p.

grid = np.array([10, 25, 50, 75, 90])
np.column_stack([grid, quantiles(senior, grid), quantiles(young, grid)])

# The KS statistic is the largest vertical gap between the two step
# functions. With 400 points per side the p-value is tiny.

d = ks_statistic(senior, young)
d, ks_pvalue(d, senior.n, young.n)

# The percentile-range distance averages horizontal gaps over a band of
# percentiles, so it is in the units of the KPI (mph here).

for lo, hi in [(1, 99), (1, 50), (50, 99), (90, 99)]:
    print(lo, hi, round(range_distance(senior, young, lo, hi), 3))
