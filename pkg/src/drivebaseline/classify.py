"""Percentile-range search and the senior/young distance classifier.

A participant is placed at (distance to young baseline, distance to senior
baseline), each distance being the mean absolute quantile gap over the chosen
percentile range. Points strictly below y = x are labelled senior.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .baseline import BaselineCurve, DEFAULT_TAU
from .errors import ValidationError
from .stats import EmpiricalCdf, ks_statistic, percentile_grid, quantiles, range_distance

DEFAULT_MIN_WIDTH = 10
DEFAULT_STEP = 1
PERCENTILES = np.arange(1, 100)


@dataclass(frozen=True)
class PercentileRange:
    lo: int
    hi: int
    objective: float = 0.0
    step: int = DEFAULT_STEP

    def __post_init__(self):
        percentile_grid(self.lo, self.hi, self.step)

    @property
    def width(self) -> int:
        return self.hi - self.lo


@dataclass(frozen=True)
class ClassificationResult:
    participant_id: str
    d_young: float
    d_senior: float
    label: str
    true_cohort: str | None = None

    @property
    def correct(self) -> bool:
        return self.label == self.true_cohort


@dataclass
class AccuracyReport:
    n_total: int
    n_correct: int
    results: list[ClassificationResult]
    range: PercentileRange
    accuracy: float = field(init=False)

    def __post_init__(self):
        self.accuracy = self.n_correct / self.n_total


def _cdf(obj) -> EmpiricalCdf:
    return obj.cdf if isinstance(obj, BaselineCurve) else obj


def margin_profile(validation_cdfs: Sequence[EmpiricalCdf], senior_base, young_base) -> np.ndarray:
    """Mean over participants of |q_P - q_young| - |q_P - q_senior| at each
    integer percentile 1..99 (index 0 is percentile 1)."""
    qs = quantiles(_cdf(senior_base), PERCENTILES)
    qy = quantiles(_cdf(young_base), PERCENTILES)
    rows = []
    for cdf in validation_cdfs:
        qp = quantiles(cdf, PERCENTILES)
        rows.append(np.abs(qp - qy) - np.abs(qp - qs))
    return np.mean(rows, axis=0)


def objective_table(validation_cdfs, senior_base, young_base, min_width=DEFAULT_MIN_WIDTH, step=DEFAULT_STEP):
    """J(lo, hi) for every feasible pair, as a dict keyed by (lo, hi)."""
    if not validation_cdfs:
        raise ValidationError("percentile-range search needs at least one validation participant")
    if min_width < 1:
        raise ValidationError(f"min_width must be >= 1, got {min_width}", key="min_width")
    if step < 1:
        raise ValidationError(f"grid step must be >= 1, got {step}", key="step")
    margin = margin_profile(validation_cdfs, senior_base, young_base)
    table = {}
    for lo in range(1, 100):
        for hi in range(lo + min_width, 100):
            table[(lo, hi)] = float(np.mean(margin[lo - 1:hi:step]))
    return table


def optimize_percentile_range(
    validation_cdfs: Sequence[EmpiricalCdf],
    senior_base,
    young_base,
    min_width: int = DEFAULT_MIN_WIDTH,
    step: int = DEFAULT_STEP,
) -> PercentileRange:
    """Exhaustive search for the range maximising the mean margin
    (distance to young minus distance to senior) over validation participants.

    Ties prefer the wider range, then the smaller ``lo``.
    """
    if isinstance(senior_base, BaselineCurve) and isinstance(young_base, BaselineCurve):
        if senior_base.metric != young_base.metric:
            raise ValidationError("baselines describe different metrics", key="metric")
    table = objective_table(validation_cdfs, senior_base, young_base, min_width, step)
    if not table:
        raise ValidationError(f"no feasible range with min_width={min_width}", key="min_width")
    best = max(table, key=lambda k: (table[k], k[1] - k[0], -k[0]))
    return PercentileRange(best[0], best[1], table[best], step)


def participant_distances(p_cdf: EmpiricalCdf, senior_base, young_base, rng: PercentileRange):
    """(d_senior, d_young) for one participant over ``rng``."""
    d_senior = range_distance(p_cdf, _cdf(senior_base), rng.lo, rng.hi, rng.step)
    d_young = range_distance(p_cdf, _cdf(young_base), rng.lo, rng.hi, rng.step)
    return d_senior, d_young


def classify_label(d_senior: float, d_young: float) -> str:
    if not (np.isfinite(d_senior) and np.isfinite(d_young)) or d_senior < 0 or d_young < 0:
        raise ValidationError(f"distances must be finite and >= 0, got {d_senior}, {d_young}")
    return "senior" if d_senior < d_young else "young"


def evaluate_accuracy(
    test_cdfs: Sequence[tuple[str, EmpiricalCdf, str]],
    senior_base,
    young_base,
    rng: PercentileRange,
) -> AccuracyReport:
    if not test_cdfs:
        raise ValidationError("accuracy evaluation needs at least one test participant")
    results = []
    for pid, cdf, truth in test_cdfs:
        d_senior, d_young = participant_distances(cdf, senior_base, young_base, rng)
        results.append(ClassificationResult(pid, d_young, d_senior, classify_label(d_senior, d_young), truth))
    return AccuracyReport(len(results), sum(r.correct for r in results), results, rng)


def exclude_validation_outliers(
    validation: Mapping[str, EmpiricalCdf], senior_base, tau: float = DEFAULT_TAU
) -> tuple[dict[str, EmpiricalCdf], dict[str, float]]:
    """Split validation participants into kept and excluded (KS distance to
    the senior baseline above ``tau``)."""
    kept, dropped = {}, {}
    for pid in sorted(validation):
        d = ks_statistic(validation[pid], _cdf(senior_base))
        if d > tau:
            dropped[pid] = d
        else:
            kept[pid] = validation[pid]
    return kept, dropped
