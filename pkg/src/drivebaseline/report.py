"""Plot-data artifacts: KS results, ranges, scatter tables, CDF curves.

Every file starts with ``#`` header lines echoing the configuration that
produced it; tables follow as CSV. Floats are written with ``repr`` so that
rereading is exact and reruns are byte-identical.
"""

from __future__ import annotations

import csv
import glob
import io
import os
from typing import Iterable, Mapping

from .baseline import FORMAT_TAG, BaselineCurve, MetricKey, load_baseline
from .classify import AccuracyReport, ClassificationResult, PercentileRange
from .errors import ValidationError
from .geo import DECEL_COLUMNS, DecelEvent
from .stats import KsResult
from .telemetry import KpiSample, skip_comments


def metric_slug(metric: MetricKey) -> str:
    return str(metric).replace(":", "")


def header_lines(echo: Mapping[str, str] | None, extra: Iterable[str] = ()) -> str:
    lines = list(extra) + [f"config {k}={v}" for k, v in sorted((echo or {}).items())]
    return "".join(f"# {line}\n" for line in lines)


def _table(rows, columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _read_rows(path) -> list[dict[str, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(skip_comments(fh)))


def _header(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, sep, val = line[2:].rstrip("\n").partition("=")
            if sep:
                out[key] = val
    return out


# ---------------------------------------------------------------- decel events


def format_decel_events(events: Iterable[DecelEvent], echo=None) -> str:
    rows = ((e.participant_id, e.trip_id, e.intersection_id, e.t_start, e.dt, e.v1, e.v2, e.a) for e in events)
    return header_lines(echo) + _table(rows, DECEL_COLUMNS)


def read_decel_samples(path) -> list[KpiSample]:
    rows = _read_rows(path)
    if rows and any(c not in rows[0] for c in DECEL_COLUMNS):
        raise ValidationError(f"{path}: not a deceleration events file", key="input")
    out = []
    for r in rows:
        a = float(r["a_ftps2"])
        if a < 0:
            out.append(KpiSample(r["intersection_id"], r["participant_id"], abs(a)))
    return out


# ---------------------------------------------------------------- KS / range / scatter


KS_COLUMNS = ("metric", "d", "p_value", "n_senior", "n_young", "alpha", "significant")


def format_ks(metric: MetricKey, res: KsResult, echo=None) -> str:
    row = (str(metric), res.d, res.p_value, res.n1, res.n2, res.alpha, str(res.significant).lower())
    return header_lines(echo) + _table([row], KS_COLUMNS)


RANGE_COLUMNS = ("metric", "lo", "hi", "objective", "step", "n_validation", "excluded")


def format_range(metric: MetricKey, rng: PercentileRange, n_validation: int, excluded: Iterable[str], echo=None) -> str:
    row = (str(metric), rng.lo, rng.hi, rng.objective, rng.step, n_validation, ";".join(sorted(excluded)))
    return header_lines(echo) + _table([row], RANGE_COLUMNS)


def read_range(path) -> tuple[MetricKey, PercentileRange]:
    rows = _read_rows(path)
    if len(rows) != 1:
        raise ValidationError(f"{path}: expected exactly one range row", key="range")
    r = rows[0]
    try:
        return MetricKey.parse(r["metric"]), PercentileRange(int(r["lo"]), int(r["hi"]), float(r["objective"]), int(r["step"]))
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed range file ({exc})", key="range") from None


SCATTER_COLUMNS = ("participant_id", "d_young", "d_senior", "label", "true_cohort")


def format_scatter(results: Iterable[ClassificationResult], echo=None, extra=()) -> str:
    rows = ((r.participant_id, r.d_young, r.d_senior, r.label, r.true_cohort or "") for r in results)
    return header_lines(echo, extra) + _table(rows, SCATTER_COLUMNS)


def format_accuracy(metric: MetricKey, report: AccuracyReport, echo=None) -> str:
    lines = [
        f"metric={metric}",
        f"range={report.range.lo}-{report.range.hi}",
        f"n_total={report.n_total}",
        f"n_correct={report.n_correct}",
        f"accuracy={report.accuracy!r}",
    ]
    return header_lines(echo) + "".join(line + "\n" for line in lines)


def read_accuracy(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in skip_comments(fh):
            key, _, val = line.strip().partition("=")
            out[key] = val
    return out


def format_anomalies(curve: BaselineCurve, echo=None) -> str:
    rows = ((f.group_id, f.level, f.ks_distance, f.iteration) for f in curve.exclusions.flagged)
    extra = [f"metric={curve.metric}", f"cohort={curve.cohort}", f"identifiable={str(curve.identifiable).lower()}",
             f"max_pairwise_ks={curve.max_pairwise_ks!r}"]
    return header_lines(echo, extra) + _table(rows, ("group_id", "level", "ks_distance", "iteration"))


# ---------------------------------------------------------------- report


def _is_baseline(path) -> bool:
    with open(path, encoding="utf-8") as fh:
        return fh.readline().rstrip("\n") == f"# {FORMAT_TAG}"


def emit_report(artifact_dir, echo=None) -> dict[str, str]:
    """Collect pipeline artifacts from ``artifact_dir`` into report files.

    Returns {file name: content}. ``cdf_curves.csv`` needs at least one
    baseline artifact; ``scatter.csv``, ``range.csv`` and ``summary.txt``
    are produced only once classification artifacts exist.
    """
    def found(pattern):
        return sorted(glob.glob(os.path.join(artifact_dir, pattern)))

    baselines = [p for p in found("baseline_*.csv") if _is_baseline(p)]
    if not baselines:
        raise ValidationError("missing artifact: baseline_*.csv", key="baseline")
    curves = []
    for path in baselines:
        with open(path, encoding="utf-8") as fh:
            curves.append(load_baseline(fh))
    curves.sort(key=lambda c: (str(c.metric), c.cohort))

    rows = []
    for c in curves:
        rows += [(str(c.metric), c.cohort, v, p) for v, p in c.cdf.steps()]
    files = {"cdf_curves.csv": header_lines(echo) + _table(rows, ("metric", "cohort", "value", "cum_prob"))}

    scatters = found("scatter_*.csv")
    if not scatters:
        return files
    scatter_rows, range_rows, summary = [], [], []
    for path in scatters:
        slug = os.path.basename(path)[len("scatter_"):-len(".csv")]
        range_path = os.path.join(artifact_dir, f"range_{slug}.csv")
        acc_path = os.path.join(artifact_dir, f"accuracy_{slug}.txt")
        for needed in (range_path, acc_path):
            if not os.path.exists(needed):
                raise ValidationError(f"missing artifact: {os.path.basename(needed)}", key=os.path.basename(needed))
        metric = _header(path).get("metric", slug)
        for r in _read_rows(path):
            scatter_rows.append([metric] + [r[c] for c in SCATTER_COLUMNS])
        for r in _read_rows(range_path):
            range_rows.append([r[c] for c in RANGE_COLUMNS])
        acc = read_accuracy(acc_path)
        summary.append(f"[{metric}]")
        ks_path = os.path.join(artifact_dir, f"kstest_{slug}.csv")
        if os.path.exists(ks_path):
            ks = _read_rows(ks_path)[0]
            summary.append(f"ks_d={ks['d']} p_value={ks['p_value']} significant={ks['significant']}")
        for c in curves:
            if metric_slug(c.metric) == slug:
                summary.append(
                    f"baseline {c.cohort}: n={c.cdf.n} segments={len(c.segments)} "
                    f"participants={len(c.participants)} excluded={len(c.exclusions.flagged)} "
                    f"identifiable={str(c.identifiable).lower()}")
        summary.append(f"range={acc['range']} accuracy={acc['accuracy']} ({acc['n_correct']}/{acc['n_total']})")
    files["scatter.csv"] = header_lines(echo) + _table(scatter_rows, ("metric",) + SCATTER_COLUMNS)
    files["range.csv"] = header_lines(echo) + _table(range_rows, RANGE_COLUMNS)
    files["summary.txt"] = header_lines(echo) + "\n".join(summary) + "\n"
    return files
