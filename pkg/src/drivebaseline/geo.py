"""Stop-intersection approach extraction and per-step deceleration.

Buffers are circles around intersection centres. Speeds are converted from
mph to ft/s before differencing, so accelerations come out in ft/s^2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import SchemaError, ValidationError
from .telemetry import DrivePoint, KpiSample, _text_stream, skip_comments

EARTH_RADIUS_M = 6_371_000.0
MPH_TO_FTPS = 5280.0 / 3600.0
DEFAULT_BUFFER_RADIUS_M = 60.0
DEFAULT_V_STOP_MPH = 5.0


@dataclass(frozen=True)
class StopIntersection:
    intersection_id: str
    lat: float
    lon: float
    buffer_radius: float = DEFAULT_BUFFER_RADIUS_M

    def __post_init__(self):
        if not (-90 <= self.lat <= 90 and -180 <= self.lon <= 180):
            raise ValidationError(f"intersection {self.intersection_id}: coordinates out of bounds")
        if not self.buffer_radius > 0:
            raise ValidationError(f"intersection {self.intersection_id}: buffer radius must be > 0",
                                  key="radius_m")


@dataclass(frozen=True)
class ApproachTrace:
    participant_id: str
    trip_id: str
    intersection_id: str
    points: tuple[DrivePoint, ...]


@dataclass(frozen=True)
class DecelEvent:
    participant_id: str
    intersection_id: str
    t_start: int
    dt: float
    v1: float
    v2: float
    a: float
    trip_id: str = ""


def load_stop_intersections(stream, default_radius: float = DEFAULT_BUFFER_RADIUS_M) -> list[StopIntersection]:
    """Read ``intersection_id, lat, lon[, radius_m]`` rows."""
    reader = csv.DictReader(skip_comments(_text_stream(stream)))
    missing = [c for c in ("intersection_id", "lat", "lon") if c not in (reader.fieldnames or ())]
    if missing:
        raise SchemaError(f"stops file missing column(s): {', '.join(missing)}", key=missing[0])
    out, seen = [], set()
    for row in reader:
        iid = row["intersection_id"]
        if iid in seen:
            raise ValidationError(f"duplicate intersection_id {iid!r}", key="intersection_id")
        seen.add(iid)
        radius = row.get("radius_m") or ""
        try:
            out.append(StopIntersection(
                iid, float(row["lat"]), float(row["lon"]),
                float(radius) if radius else default_radius,
            ))
        except ValueError as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"intersection {iid!r}: bad number ({exc})") from None
    return out


def write_stop_intersections(intersections: Iterable[StopIntersection], fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["intersection_id", "lat", "lon", "radius_m"])
    for s in intersections:
        writer.writerow([s.intersection_id, repr(s.lat), repr(s.lon), repr(float(s.buffer_radius))])


def geodesic_distance(p1, p2) -> float:
    """Great-circle (haversine) distance in metres between two (lat, lon) pairs."""
    lat1, lon1 = map(math.radians, p1)
    lat2, lon2 = map(math.radians, p2)
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def _distances_to(lat, lon, center_lat, center_lon) -> np.ndarray:
    lat1, lon1 = np.radians(lat), np.radians(lon)
    lat2, lon2 = math.radians(center_lat), math.radians(center_lon)
    h = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * math.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def _runs(mask: np.ndarray):
    """(start, stop) index pairs of maximal True runs."""
    padded = np.concatenate([[False], mask, [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return zip(edges[::2], edges[1::2])


def extract_approach_traces(
    trips: Sequence[Sequence[DrivePoint]],
    intersections: Sequence[StopIntersection],
    v_stop: float = DEFAULT_V_STOP_MPH,
) -> list[ApproachTrace]:
    """Cut every contiguous in-buffer run of each trip at its first point with
    speed <= ``v_stop``; runs that never slow down are kept to buffer exit.

    Runs (or cut traces) shorter than two points yield nothing.
    """
    traces = []
    for trip in trips:
        if len(trip) < 2:
            continue
        lat = np.array([np.nan if p.lat is None else p.lat for p in trip])
        lon = np.array([np.nan if p.lon is None else p.lon for p in trip])
        speed = np.array([np.inf if p.speed is None else p.speed for p in trip])
        for stop in intersections:
            with np.errstate(invalid="ignore"):
                inside = _distances_to(lat, lon, stop.lat, stop.lon) <= stop.buffer_radius
            for start, end in _runs(inside):
                slow = np.flatnonzero(speed[start:end] <= v_stop)
                if slow.size:
                    end = start + slow[0] + 1
                if end - start < 2:
                    continue
                traces.append(ApproachTrace(
                    trip[0].participant_id, trip[0].trip_id, stop.intersection_id,
                    tuple(trip[start:end]),
                ))
    return traces


def compute_deceleration(trace: ApproachTrace, only_decelerations: bool = True) -> list[DecelEvent]:
    """Per-step acceleration a = (v2 - v1) / dt in ft/s^2 between consecutive
    trace points. By default only steps with a < 0 are returned; pass
    ``only_decelerations=False`` to get every step.
    """
    pts = trace.points
    if len(pts) < 2:
        raise ValidationError("approach trace needs at least two points")
    events = []
    for p, q in zip(pts, pts[1:]):
        dt = q.t - p.t
        if dt <= 0:
            raise ValidationError(
                f"non-increasing timestamps in trip {trace.trip_id}: {p.t} -> {q.t}", key="t")
        v1 = p.speed * MPH_TO_FTPS
        v2 = q.speed * MPH_TO_FTPS
        a = (v2 - v1) / dt
        if a < 0 or not only_decelerations:
            events.append(DecelEvent(
                trace.participant_id, trace.intersection_id, p.t, float(dt), v1, v2, a, trace.trip_id))
    return events


def deceleration_samples(events: Iterable[DecelEvent]):
    """Deceleration KPI samples (intersection_id, participant_id, |a|)."""
    return [KpiSample(e.intersection_id, e.participant_id, abs(e.a)) for e in events if e.a < 0]


DECEL_COLUMNS = ("participant_id", "trip_id", "intersection_id", "t_start", "dt", "v1_ftps", "v2_ftps", "a_ftps2")
