"""Per-second drive records: parsing, cleaning, interstate selection, cohorts.

Drive files are flat CSV (or JSON-lines with the same keys), one row per
second per trip. An empty field means the value is absent.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Mapping, NamedTuple, Sequence

from .errors import SchemaError, ValidationError

DRIVE_COLUMNS = (
    "participant_id",
    "trip_id",
    "t",
    "lat",
    "lon",
    "speed_mph",
    "road_class",
    "segment_id",
    "posted_limit_mph",
)
OPTIONAL_DRIVE_COLUMNS = ("accel_ftps2",)
ROSTER_COLUMNS = ("participant_id", "age", "sex")

ROAD_CLASSES = ("interstate", "other")
SEXES = ("male", "female", "unspecified")
COHORTS = ("senior", "young")

LICENSING_AGE = 16
SENIOR_AGE = 65


@dataclass(frozen=True)
class DrivePoint:
    participant_id: str
    trip_id: str
    t: int
    lat: float | None
    lon: float | None
    speed: float | None
    road_class: str
    segment_id: str
    posted_limit: float | None = None
    accel: float | None = None

    @property
    def complete(self) -> bool:
        return self.lat is not None and self.lon is not None and self.speed is not None


class KpiSample(NamedTuple):
    """One KPI value tagged with the segment (or intersection) and participant it came from."""

    segment_id: str
    participant_id: str
    value: float


@dataclass(frozen=True)
class ParseIssue:
    line: int
    column: str | None
    message: str


@dataclass(frozen=True)
class Participant:
    participant_id: str
    age: int
    sex: str = "unspecified"
    senior_age: int = SENIOR_AGE

    @property
    def cohort(self) -> str:
        return assign_cohort(self.age, self.senior_age)


@dataclass
class CleanReport:
    rows_in: int = 0
    rows_dropped_missing: int = 0
    rows_dropped_filter: int = 0
    rows_out: int = 0
    reasons: dict[str, int] = field(default_factory=dict)

    def balanced(self) -> bool:
        return self.rows_in == self.rows_out + self.rows_dropped_missing + self.rows_dropped_filter


@dataclass(frozen=True)
class SegmentSummary:
    segment_id: str
    posted_limit: float
    n_points: int
    n_participants: int
    cohort_points: Mapping[str, int] = field(default_factory=dict)
    cohort_participants: Mapping[str, int] = field(default_factory=dict)


def assign_cohort(age: int, threshold: int = SENIOR_AGE) -> str:
    """``senior`` when ``age >= threshold``, otherwise ``young``."""
    if age < LICENSING_AGE:
        raise ValidationError(f"age {age} is below the licensing floor of {LICENSING_AGE}", key="age")
    return "senior" if age >= threshold else "young"


# ---------------------------------------------------------------- parsing


def _text_stream(stream) -> IO[str]:
    if isinstance(stream, (bytes, bytearray)):
        return io.StringIO(stream.decode("utf-8"))
    if isinstance(stream, io.TextIOBase):
        return stream
    if hasattr(stream, "read"):
        return io.TextIOWrapper(stream, encoding="utf-8", newline="")
    raise OSError(f"unreadable stream: {stream!r}")


def _opt_float(raw, column):
    if raw is None or raw == "":
        return None
    if isinstance(raw, bool):
        raise ValueError(column)
    val = float(raw)
    if not math.isfinite(val):
        raise ValueError(column)
    return val


def _row_to_point(row: Mapping[str, object]) -> DrivePoint:
    """Convert one raw record; raises ``_RowError`` naming the bad column."""

    def req_str(col):
        val = row.get(col)
        if val is None or str(val) == "":
            raise _RowError(col, "required value is empty")
        return str(val)

    def num(col):
        try:
            return _opt_float(row.get(col), col)
        except (TypeError, ValueError):
            raise _RowError(col, f"not a finite number: {row.get(col)!r}") from None

    pid = req_str("participant_id")
    trip = req_str("trip_id")
    raw_t = row.get("t")
    try:
        t_f = float(raw_t)
        if not t_f.is_integer() or t_f < 0:
            raise ValueError
        t = int(t_f)
    except (TypeError, ValueError):
        raise _RowError("t", f"not a non-negative integer: {raw_t!r}") from None

    lat, lon = num("lat"), num("lon")
    if lat is not None and not -90 <= lat <= 90:
        raise _RowError("lat", f"out of range: {lat}")
    if lon is not None and not -180 <= lon <= 180:
        raise _RowError("lon", f"out of range: {lon}")
    speed = num("speed_mph")
    if speed is not None and speed < 0:
        raise _RowError("speed_mph", f"negative speed: {speed}")
    road_class = req_str("road_class")
    if road_class not in ROAD_CLASSES:
        raise _RowError("road_class", f"unknown road class {road_class!r}")
    segment = req_str("segment_id")
    limit = num("posted_limit_mph")
    if limit is not None and limit <= 0:
        raise _RowError("posted_limit_mph", f"non-positive limit: {limit}")
    accel = num("accel_ftps2")
    return DrivePoint(pid, trip, t, lat, lon, speed, road_class, segment, limit, accel)


class _RowError(Exception):
    def __init__(self, column, message):
        super().__init__(message)
        self.column = column


def _check_header(fields: Iterable[str] | None):
    fields = set(fields or ())
    missing = [c for c in DRIVE_COLUMNS if c not in fields]
    if missing:
        raise SchemaError(f"drive records missing required column(s): {', '.join(missing)}",
                          key=missing[0])


def parse_drive_records(stream, format: str = "csv") -> tuple[list[DrivePoint], list[ParseIssue]]:
    """Parse drive records from a text/binary stream.

    Malformed rows are reported as :class:`ParseIssue` (1-based physical line
    numbers, header is line 1) instead of aborting the whole file. A row
    whose ``t`` does not increase within its trip is also rejected.
    """
    if format not in ("csv", "jsonl"):
        raise ValidationError(f"unknown drive format {format!r}", key="format")
    text = _text_stream(stream)

    if format == "csv":
        lines = list(text)
        offset = 0
        while offset < len(lines) and lines[offset].startswith("#"):
            offset += 1
        reader = csv.DictReader(lines[offset:])
        _check_header(reader.fieldnames)
        records = ((reader.line_num + offset, row) for row in reader)
    else:
        records = _jsonl_records(text)

    points: list[DrivePoint] = []
    issues: list[ParseIssue] = []
    last_t: dict[tuple[str, str], int] = {}
    for line, row in records:
        if isinstance(row, ParseIssue):
            issues.append(row)
            continue
        try:
            point = _row_to_point(row)
        except _RowError as exc:
            issues.append(ParseIssue(line, exc.column, str(exc)))
            continue
        key = (point.participant_id, point.trip_id)
        if key in last_t and point.t <= last_t[key]:
            issues.append(ParseIssue(line, "t", f"t={point.t} not increasing within trip"))
            continue
        last_t[key] = point.t
        points.append(point)
    return points, issues


def _jsonl_records(text):
    header_checked = False
    for line_no, line in enumerate(text, start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            yield line_no, ParseIssue(line_no, None, f"invalid JSON: {exc.msg}")
            continue
        if not isinstance(row, dict):
            yield line_no, ParseIssue(line_no, None, "record is not an object")
            continue
        if not header_checked:
            _check_header(row.keys())
            header_checked = True
        yield line_no, row


def load_drive_file(path, format: str | None = None):
    fmt = format or ("jsonl" if str(path).endswith((".jsonl", ".json")) else "csv")
    with open(path, "rb") as fh:
        return parse_drive_records(fh, fmt)


def _fmt(val) -> str:
    if val is None:
        return ""
    return repr(val) if isinstance(val, float) else str(val)


def write_drive_records(points: Iterable[DrivePoint], fh: IO[str], header_lines: Sequence[str] = ()):
    """Write points in the drive CSV schema; ``header_lines`` become ``#`` comments."""
    for line in header_lines:
        fh.write(f"# {line}\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(DRIVE_COLUMNS + OPTIONAL_DRIVE_COLUMNS)
    for p in points:
        writer.writerow([
            p.participant_id, p.trip_id, p.t, _fmt(p.lat), _fmt(p.lon), _fmt(p.speed),
            p.road_class, p.segment_id, _fmt(p.posted_limit), _fmt(p.accel),
        ])


def skip_comments(fh: IO[str]):
    """Yield the lines of ``fh`` that are not ``#`` comments."""
    for line in fh:
        if not line.startswith("#"):
            yield line


def load_roster(stream, senior_age: int = SENIOR_AGE) -> dict[str, Participant]:
    text = _text_stream(stream)
    reader = csv.DictReader(skip_comments(text))
    missing = [c for c in ROSTER_COLUMNS if c not in (reader.fieldnames or ())]
    if missing:
        raise SchemaError(f"roster missing required column(s): {', '.join(missing)}", key=missing[0])
    roster: dict[str, Participant] = {}
    for row in reader:
        pid = row["participant_id"]
        if not pid:
            raise ValidationError("roster row with empty participant_id", key="participant_id")
        if pid in roster:
            raise ValidationError(f"duplicate participant_id {pid!r} in roster", key="participant_id")
        try:
            age = int(row["age"])
        except ValueError:
            raise ValidationError(f"bad age {row['age']!r} for {pid}", key="age") from None
        sex = row["sex"] or "unspecified"
        if sex not in SEXES:
            raise ValidationError(f"bad sex {sex!r} for {pid}", key="sex")
        assign_cohort(age, senior_age)
        roster[pid] = Participant(pid, age, sex, senior_age)
    return roster


def write_roster(participants: Iterable[Participant], fh: IO[str]):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(ROSTER_COLUMNS)
    for p in participants:
        writer.writerow([p.participant_id, p.age, p.sex])


# ---------------------------------------------------------------- cleaning


def clean(points: Sequence[DrivePoint]) -> tuple[list[DrivePoint], CleanReport]:
    """Drop points without GPS or speed. Missing acceleration is kept: it is
    recomputed from speed differences downstream."""
    kept = []
    reasons: Counter[str] = Counter()
    for p in points:
        if p.lat is None:
            reasons["missing_lat"] += 1
        elif p.lon is None:
            reasons["missing_lon"] += 1
        elif p.speed is None:
            reasons["missing_speed"] += 1
        else:
            kept.append(p)
    report = CleanReport(
        rows_in=len(points),
        rows_dropped_missing=len(points) - len(kept),
        rows_dropped_filter=0,
        rows_out=len(kept),
        reasons=dict(sorted(reasons.items())),
    )
    return kept, report


def _mode(values):
    counts = Counter(values)
    top = max(counts.values())
    return min(v for v, c in counts.items() if c == top)


def filter_select(
    points: Sequence[DrivePoint],
    min_limit: float = 65,
    road_class: str = "interstate",
    min_points_per_segment: int = 200,
    min_participants_per_segment: int = 3,
    cohorts: Mapping[str, str] | None = None,
) -> tuple[list[DrivePoint], list[SegmentSummary]]:
    """Keep points on ``road_class`` roads posted at ``min_limit`` or above,
    then drop segments without enough points or distinct participants.

    ``cohorts`` (participant_id -> cohort) only feeds the per-cohort counts
    of the returned summaries.
    """
    if road_class not in ROAD_CLASSES:
        raise ValidationError(f"unknown road class {road_class!r}", key="road_class")
    candidates = [
        p for p in points
        if p.road_class == road_class and p.posted_limit is not None and p.posted_limit >= min_limit
    ]
    by_segment: dict[str, list[DrivePoint]] = defaultdict(list)
    for p in candidates:
        by_segment[p.segment_id].append(p)

    keep_segments = set()
    summaries = []
    for seg in sorted(by_segment):
        seg_points = by_segment[seg]
        participants = {p.participant_id for p in seg_points}
        if len(seg_points) < min_points_per_segment or len(participants) < min_participants_per_segment:
            continue
        keep_segments.add(seg)
        cohort_points: Counter[str] = Counter()
        cohort_people: dict[str, set] = defaultdict(set)
        if cohorts is not None:
            for p in seg_points:
                c = cohorts.get(p.participant_id, "unknown")
                cohort_points[c] += 1
                cohort_people[c].add(p.participant_id)
        summaries.append(SegmentSummary(
            segment_id=seg,
            posted_limit=_mode(p.posted_limit for p in seg_points),
            n_points=len(seg_points),
            n_participants=len(participants),
            cohort_points=dict(sorted(cohort_points.items())),
            cohort_participants={c: len(s) for c, s in sorted(cohort_people.items())},
        ))
    kept = [p for p in candidates if p.segment_id in keep_segments]
    return kept, summaries


def ingest(points, **filter_kwargs) -> tuple[list[DrivePoint], CleanReport, list[SegmentSummary]]:
    """``clean`` followed by ``filter_select``, with filter drops folded into one report."""
    cleaned, report = clean(points)
    selected, summaries = filter_select(cleaned, **filter_kwargs)
    report = replace(
        report,
        rows_dropped_filter=len(cleaned) - len(selected),
        rows_out=len(selected),
        reasons={**report.reasons, "filtered": len(cleaned) - len(selected)},
    )
    return selected, report, summaries


def split_trips(points: Iterable[DrivePoint]) -> list[list[DrivePoint]]:
    """Group points by (participant, trip), each trip sorted by time."""
    trips: dict[tuple[str, str], list[DrivePoint]] = defaultdict(list)
    for p in points:
        trips[(p.participant_id, p.trip_id)].append(p)
    return [sorted(trips[k], key=lambda p: p.t) for k in sorted(trips)]


def speed_samples(points: Iterable[DrivePoint], posted_limit: float):
    """Speed-adherence KPI samples: (segment_id, participant_id, speed) for
    complete points posted at exactly ``posted_limit``."""
    return [
        KpiSample(p.segment_id, p.participant_id, p.speed)
        for p in points
        if p.speed is not None and p.posted_limit == posted_limit
    ]
