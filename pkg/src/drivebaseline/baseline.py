"""Cohort baseline curves: per-group CDFs, leave-one-out anomaly removal,
pooling, and the senior-vs-young KS comparison."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyBaselineError, ValidationError
from .stats import EmpiricalCdf, KsResult, build_cdf, ks_pvalue, ks_statistic
from .telemetry import COHORTS, KpiSample

__all__ = [
    "KpiSample",
    "MetricKey",
    "AnomalyFlag",
    "AnomalyReport",
    "BaselineCurve",
    "group_cdfs",
    "detect_anomalies",
    "build_baseline",
    "compare_baselines",
    "save_baseline",
    "load_baseline",
]

KPIS = ("speed_adherence", "stop_deceleration")
DEFAULT_TAU = 0.25
DEFAULT_MAX_ITER = 10
FORMAT_TAG = "drivebaseline-baseline v1"


@dataclass(frozen=True)
class MetricKey:
    kpi: str
    posted_limit: float | None = None

    def __post_init__(self):
        if self.kpi not in KPIS:
            raise ValidationError(f"unknown KPI {self.kpi!r}", key="metric")
        if (self.kpi == "speed_adherence") != (self.posted_limit is not None):
            raise ValidationError("a posted limit is required for speed adherence and only for it",
                                  key="metric")
        if self.posted_limit is not None and not self.posted_limit > 0:
            raise ValidationError("posted limit must be positive", key="metric")

    @classmethod
    def parse(cls, text: str) -> "MetricKey":
        """``speed:75`` or ``decel``."""
        head, _, tail = text.strip().partition(":")
        if head in ("speed", "speed_adherence"):
            try:
                return cls("speed_adherence", float(tail))
            except ValueError:
                raise ValidationError(f"bad metric {text!r}; expected speed:<mph>", key="metric") from None
        if head in ("decel", "stop_deceleration") and not tail:
            return cls("stop_deceleration")
        raise ValidationError(f"bad metric {text!r}; expected speed:<mph> or decel", key="metric")

    def __str__(self):
        if self.posted_limit is None:
            return "decel"
        lim = self.posted_limit
        return f"speed:{int(lim) if float(lim).is_integer() else lim}"


@dataclass(frozen=True)
class AnomalyFlag:
    group_id: str
    level: str
    ks_distance: float
    iteration: int


@dataclass
class AnomalyReport:
    flagged: list[AnomalyFlag] = field(default_factory=list)
    iterations: int = 0

    @property
    def flagged_ids(self) -> set[str]:
        return {f.group_id for f in self.flagged}

    def at_level(self, level: str) -> list[AnomalyFlag]:
        return [f for f in self.flagged if f.level == level]

    def __add__(self, other: "AnomalyReport") -> "AnomalyReport":
        return AnomalyReport(self.flagged + other.flagged, self.iterations + other.iterations)


@dataclass
class BaselineCurve:
    metric: MetricKey
    cohort: str
    cdf: EmpiricalCdf
    segments: tuple[str, ...]
    participants: tuple[str, ...]
    exclusions: AnomalyReport
    tau_segment: float = DEFAULT_TAU
    tau_participant: float = DEFAULT_TAU
    max_iter: int = DEFAULT_MAX_ITER
    max_pairwise_ks: float = 0.0
    identifiable: bool = True


def group_cdfs(samples: Iterable[tuple[str, float]]) -> dict[str, EmpiricalCdf]:
    groups: dict[str, list[float]] = defaultdict(list)
    for gid, value in samples:
        groups[gid].append(value)
    return {gid: build_cdf(groups[gid]) for gid in sorted(groups)}


def _cum_matrix(cdfs: Sequence[EmpiricalCdf]):
    grid = np.unique(np.concatenate([c.values for c in cdfs]))
    rows = []
    for c in cdfs:
        cum = np.concatenate([[0], c.cum_counts])
        rows.append(cum[np.searchsorted(c.values, grid, side="right")])
    return np.vstack(rows), np.array([c.n for c in cdfs], dtype=np.int64)


def leave_one_out_distances(cdfs: Mapping[str, EmpiricalCdf]) -> dict[str, float]:
    """KS distance of every group against the pooled samples of all the others."""
    ids = sorted(cdfs)
    cum, n = _cum_matrix([cdfs[g] for g in ids])
    total_cum = cum.sum(axis=0)
    total = int(n.sum())
    out = {}
    for i, gid in enumerate(ids):
        rest = total - n[i]
        # same integer form as stats.ks_statistic
        gap = np.abs(cum[i] * rest - (total_cum - cum[i]) * n[i]).max()
        out[gid] = float(gap) / float(n[i] * rest)
    return out


def detect_anomalies(
    cdfs: Mapping[str, EmpiricalCdf],
    tau: float = DEFAULT_TAU,
    max_iter: int = DEFAULT_MAX_ITER,
    level: str = "segment",
) -> AnomalyReport:
    """Greedy worst-first removal of groups whose leave-one-out KS distance
    exceeds ``tau``. One group is flagged per iteration; ties go to the
    lexicographically smallest id."""
    if len(cdfs) < 2:
        raise ValidationError("anomaly detection needs at least two groups")
    if not 0 < tau <= 1:
        raise ValidationError(f"tau must lie in (0, 1], got {tau}", key="tau")
    if max_iter < 0:
        raise ValidationError("max_iter must be >= 0", key="max_iter")
    survivors = dict(cdfs)
    report = AnomalyReport()
    for iteration in range(1, max_iter + 1):
        if len(survivors) < 2:
            break
        report.iterations = iteration
        dists = leave_one_out_distances(survivors)
        worst = max(dists.values())
        if worst <= tau:
            break
        gid = min(g for g, d in dists.items() if d == worst)
        report.flagged.append(AnomalyFlag(gid, level, worst, iteration))
        del survivors[gid]
    return report


def max_pairwise_ks(cdfs: Mapping[str, EmpiricalCdf]) -> float:
    ids = sorted(cdfs)
    best = 0.0
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            best = max(best, ks_statistic(cdfs[a], cdfs[b]))
    return best


def _level_pass(samples, key, tau, max_iter, level):
    groups = group_cdfs((getattr(s, key), s.value) for s in samples)
    if len(groups) < 2:
        return samples, AnomalyReport()
    report = detect_anomalies(groups, tau, max_iter, level)
    drop = report.flagged_ids
    return [s for s in samples if getattr(s, key) not in drop], report


def build_baseline(
    samples: Sequence[KpiSample],
    metric: MetricKey,
    cohort: str,
    tau_segment: float = DEFAULT_TAU,
    tau_participant: float = DEFAULT_TAU,
    max_iter: int = DEFAULT_MAX_ITER,
) -> BaselineCurve:
    """Remove anomalous segments, then anomalous participants among what is
    left, and pool the surviving samples into one cohort CDF.

    A level with fewer than two groups is passed through unchecked. If the
    survivors still disagree pairwise by more than tau the curve is marked
    non-identifiable.
    """
    if cohort not in COHORTS:
        raise ValidationError(f"unknown cohort {cohort!r}", key="cohort")
    samples = list(samples)
    if not samples:
        raise EmptyBaselineError(f"no samples for {metric} / {cohort}")
    kept, seg_report = _level_pass(samples, "segment_id", tau_segment, max_iter, "segment")
    kept, part_report = _level_pass(kept, "participant_id", tau_participant, max_iter, "participant")
    if not kept:
        raise EmptyBaselineError(f"every group was flagged for {metric} / {cohort}; empty baseline")

    spread = 0.0
    identifiable = True
    for key, tau in (("segment_id", tau_segment), ("participant_id", tau_participant)):
        groups = group_cdfs((getattr(s, key), s.value) for s in kept)
        worst = max_pairwise_ks(groups)
        spread = max(spread, worst)
        if worst > tau:
            identifiable = False

    return BaselineCurve(
        metric=metric,
        cohort=cohort,
        cdf=build_cdf([s.value for s in kept]),
        segments=tuple(sorted({s.segment_id for s in kept})),
        participants=tuple(sorted({s.participant_id for s in kept})),
        exclusions=seg_report + part_report,
        tau_segment=tau_segment,
        tau_participant=tau_participant,
        max_iter=max_iter,
        max_pairwise_ks=spread,
        identifiable=identifiable,
    )


def compare_baselines(senior: BaselineCurve, young: BaselineCurve, alpha: float = 0.05) -> KsResult:
    if senior.metric != young.metric:
        raise ValidationError(f"metric mismatch: {senior.metric} vs {young.metric}", key="metric")
    if not 0 < alpha < 1:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}", key="alpha")
    d = ks_statistic(senior.cdf, young.cdf)
    p = ks_pvalue(d, senior.cdf.n, young.cdf.n)
    return KsResult(d, p, senior.cdf.n, young.cdf.n, significant=p < alpha, alpha=alpha)


# ---------------------------------------------------------------- artifacts


def save_baseline(curve: BaselineCurve, fh: IO[str], config: Mapping[str, object] | None = None):
    """Write a baseline artifact: ``#`` header lines (JSON values) then CDF steps as CSV."""
    header = {
        "metric": str(curve.metric),
        "cohort": curve.cohort,
        "tau_segment": curve.tau_segment,
        "tau_participant": curve.tau_participant,
        "max_iter": curve.max_iter,
        "identifiable": curve.identifiable,
        "max_pairwise_ks": curve.max_pairwise_ks,
        "segments": list(curve.segments),
        "participants": list(curve.participants),
        "flagged": [[f.group_id, f.level, f.ks_distance, f.iteration] for f in curve.exclusions.flagged],
        "iterations": curve.exclusions.iterations,
    }
    fh.write(f"# {FORMAT_TAG}\n")
    for key, val in header.items():
        fh.write(f"# {key}={json.dumps(val)}\n")
    for key, val in sorted((config or {}).items()):
        fh.write(f"# config.{key}={val}\n")
    fh.write("value,count,cum_prob\n")
    for v, c, p in zip(curve.cdf.values.tolist(), curve.cdf.counts.tolist(), curve.cdf.probs.tolist()):
        fh.write(f"{v!r},{c},{p!r}\n")


def load_baseline(fh: IO[str]) -> BaselineCurve:
    first = fh.readline().rstrip("\n")
    if first != f"# {FORMAT_TAG}":
        raise ValidationError(f"not a baseline artifact (header {first!r})", key="format")
    header = {}
    line = fh.readline()
    while line.startswith("#"):
        key, _, val = line[2:].rstrip("\n").partition("=")
        if not key.startswith("config."):
            header[key] = json.loads(val)
        line = fh.readline()
    if line.strip() != "value,count,cum_prob":
        raise ValidationError("baseline artifact missing CDF table", key="format")
    values, counts = [], []
    for row in fh:
        if not row.strip():
            continue
        v, c, _ = row.split(",")
        values.append(float(v))
        counts.append(int(c))
    try:
        return BaselineCurve(
            metric=MetricKey.parse(header["metric"]),
            cohort=header["cohort"],
            cdf=EmpiricalCdf(np.array(values), np.array(counts)),
            segments=tuple(header["segments"]),
            participants=tuple(header["participants"]),
            exclusions=AnomalyReport(
                [AnomalyFlag(g, lvl, float(d), int(it)) for g, lvl, d, it in header["flagged"]],
                header["iterations"],
            ),
            tau_segment=header["tau_segment"],
            tau_participant=header["tau_participant"],
            max_iter=header["max_iter"],
            max_pairwise_ks=header["max_pairwise_ks"],
            identifiable=header["identifiable"],
        )
    except KeyError as exc:
        raise ValidationError(f"baseline artifact header lacks {exc.args[0]}", key=exc.args[0]) from None
