"""Cohort driving-behaviour baselines from naturalistic driving telemetry.

Empirical CDFs of speed-limit adherence and stop-intersection deceleration
are pooled into senior and young baseline curves, compared with a two-sample
KS test, and used to label drivers by their quantile distance to each curve.
"""

from .baseline import (
    AnomalyReport,
    BaselineCurve,
    MetricKey,
    build_baseline,
    compare_baselines,
    detect_anomalies,
    group_cdfs,
)
from .classify import (
    AccuracyReport,
    ClassificationResult,
    PercentileRange,
    classify_label,
    evaluate_accuracy,
    optimize_percentile_range,
    participant_distances,
)
from .errors import EmptyBaselineError, SchemaError, ValidationError
from .geo import (
    ApproachTrace,
    DecelEvent,
    StopIntersection,
    compute_deceleration,
    extract_approach_traces,
    geodesic_distance,
    load_stop_intersections,
)
from .stats import (
    EmpiricalCdf,
    KsResult,
    build_cdf,
    ks_pvalue,
    ks_statistic,
    quantile,
    range_distance,
)
from .telemetry import (
    CleanReport,
    DrivePoint,
    KpiSample,
    Participant,
    SegmentSummary,
    assign_cohort,
    clean,
    filter_select,
    parse_drive_records,
)

__version__ = "0.1.0"
