"""Seeded synthetic cohorts in the drive-record schema.

Randomness comes from numpy's PCG64 (``numpy.random.default_rng``). Other
tools should share fixtures through the emitted CSV files, not RNG streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .geo import DEFAULT_V_STOP_MPH, EARTH_RADIUS_M, MPH_TO_FTPS, StopIntersection
from .telemetry import COHORTS, DrivePoint, Participant

FT_TO_M = 0.3048
DEFAULT_SEGMENTS = (("I80-E1", 75.0), ("I80-E2", 75.0), ("I80-E3", 75.0))
AGE_RANGES = {"senior": (65, 88), "young": (21, 64)}


@dataclass(frozen=True)
class CohortSpec:
    cohort: str
    n_participants: int = 10
    trips_per_participant: int = 2
    points_per_trip: int = 100
    speed_mean: float = 72.0
    speed_sd: float = 2.0
    decel_mean: float = 5.0
    decel_sd: float = 1.5
    segments: tuple[tuple[str, float], ...] = DEFAULT_SEGMENTS
    seed: int = 0
    id_prefix: str | None = None
    # planted per-segment / per-participant speed shifts, mph
    segment_offsets: Mapping[str, float] = field(default_factory=dict)
    participant_offsets: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.cohort not in COHORTS:
            raise ValidationError(f"unknown cohort {self.cohort!r}", key="cohort")
        for name in ("n_participants", "trips_per_participant", "points_per_trip"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1", key=name)
        if self.speed_sd < 0 or self.decel_sd < 0:
            raise ValidationError("standard deviations must be >= 0")
        if not (math.isfinite(self.speed_mean) and math.isfinite(self.decel_mean)):
            raise ValidationError("means must be finite")
        if not self.segments:
            raise ValidationError("at least one segment is required", key="segments")

    @property
    def prefix(self) -> str:
        return self.id_prefix if self.id_prefix is not None else self.cohort[0].upper()

    def participant_ids(self) -> list[str]:
        return [f"{self.prefix}{i:03d}" for i in range(self.n_participants)]


def truncated_normal(rng: np.random.Generator, mean: float, sd: float, size: int, low: float = 0.0):
    if sd == 0:
        return np.full(size, max(mean, low))
    from scipy.stats import truncnorm  # deferred: scipy.stats dominates CLI start-up

    return truncnorm.rvs((low - mean) / sd, np.inf, loc=mean, scale=sd, size=size, random_state=rng)


def generate_roster(spec: CohortSpec) -> list[Participant]:
    rng = np.random.default_rng([spec.seed, 1])
    lo, hi = AGE_RANGES[spec.cohort]
    ages = rng.integers(lo, hi + 1, size=spec.n_participants)
    sexes = rng.choice(["female", "male"], size=spec.n_participants)
    return [Participant(pid, int(a), str(s)) for pid, a, s in zip(spec.participant_ids(), ages, sexes)]


def _offset(lat0, lon0, north_m, east_m):
    lat = lat0 + math.degrees(north_m / EARTH_RADIUS_M)
    lon = lon0 + math.degrees(east_m / (EARTH_RADIUS_M * math.cos(math.radians(lat0))))
    return lat, lon


def generate_speed_traces(spec: CohortSpec) -> list[DrivePoint]:
    """Interstate speed traces; trip j of participant i runs on segment (i + j) mod #segments."""
    rng = np.random.default_rng(spec.seed)
    points = []
    n_seg = len(spec.segments)
    for i, pid in enumerate(spec.participant_ids()):
        for j in range(spec.trips_per_participant):
            seg_idx = (i + j) % n_seg
            seg_id, limit = spec.segments[seg_idx]
            mean = spec.speed_mean + spec.segment_offsets.get(seg_id, 0.0) + spec.participant_offsets.get(pid, 0.0)
            speeds = truncated_normal(rng, mean, spec.speed_sd, spec.points_per_trip)
            lat0, lon0 = 41.20 + 0.05 * seg_idx, -96.30
            travelled = np.concatenate([[0.0], np.cumsum(speeds[:-1] * 0.44704)])
            for t, (v, x) in enumerate(zip(speeds, travelled)):
                lat, lon = _offset(lat0, lon0, 0.0, float(x))
                points.append(DrivePoint(pid, f"{pid}-T{j:02d}", t, lat, lon, float(v),
                                         "interstate", seg_id, float(limit)))
    return points


def make_intersections(n: int, spacing_m: float = 1000.0, radius_m: float = 60.0,
                       origin=(41.25, -96.00)) -> list[StopIntersection]:
    """``n`` stop intersections on an east-west line, far enough apart that buffers never overlap."""
    out = []
    for k in range(n):
        lat, lon = _offset(origin[0], origin[1], 0.0, k * spacing_m)
        out.append(StopIntersection(f"X{k:03d}", lat, lon, radius_m))
    return out


def _braking_profile(rng, spec, v0_ftps, v_stop_ftps):
    speeds = [v0_ftps]
    while speeds[-1] > v_stop_ftps:
        a = max(0.5, rng.normal(spec.decel_mean, spec.decel_sd)) if spec.decel_sd > 0 else max(0.5, spec.decel_mean)
        speeds.append(max(0.0, speeds[-1] - a))
    return speeds


def generate_stop_approaches(
    spec: CohortSpec,
    intersections: Sequence[StopIntersection],
    v_stop: float = DEFAULT_V_STOP_MPH,
    cruise_mph: float = 30.0,
    posted_limit: float = 25.0,
) -> list[DrivePoint]:
    """Straight-line approaches that cruise into each buffer and brake to a
    halt at the centre, one trip per (participant, trip index, intersection).

    Per-step braking magnitudes are drawn from the cohort's deceleration
    model; timestamps are 1 s apart.
    """
    if not intersections:
        raise ValidationError("stop approaches need at least one intersection")
    if cruise_mph <= v_stop:
        raise ValidationError("cruise speed must exceed the stop speed")
    rng = np.random.default_rng([spec.seed, 2])
    v0 = cruise_mph * MPH_TO_FTPS
    points = []
    for pid in spec.participant_ids():
        for j in range(spec.trips_per_participant):
            for stop in intersections:
                speeds = _braking_profile(rng, spec, v0, v_stop * MPH_TO_FTPS)
                # distance-to-centre (m) of each braking point, stop point at the centre
                steps = [(a + b) / 2 * FT_TO_M for a, b in zip(speeds, speeds[1:])]
                dist = list(np.cumsum(steps[::-1])[::-1]) + [0.0]
                lead = v0 * FT_TO_M
                while dist[0] <= stop.buffer_radius + 2 * lead:
                    dist.insert(0, dist[0] + lead)
                    speeds.insert(0, v0)
                speeds += [0.0, 0.0]
                dist += [0.0, 0.0]
                bearing = rng.uniform(0, 2 * math.pi)
                trip_id = f"{pid}-S{j:02d}-{stop.intersection_id}"
                for t, (v, d) in enumerate(zip(speeds, dist)):
                    lat, lon = _offset(stop.lat, stop.lon, -d * math.cos(bearing), -d * math.sin(bearing))
                    points.append(DrivePoint(pid, trip_id, t, lat, lon, float(v / MPH_TO_FTPS),
                                             "other", stop.intersection_id, posted_limit))
    return points


@dataclass
class Scenario:
    """Baseline, validation and test drive sets plus roster and stops."""

    baseline: list[DrivePoint]
    validation: list[DrivePoint]
    test: list[DrivePoint]
    roster: list[Participant]
    stops: list[StopIntersection]
    stop_baseline: list[DrivePoint]
    stop_validation: list[DrivePoint]
    stop_test: list[DrivePoint]


def make_scenario(
    seed: int,
    senior_speed=(72.0, 2.0),
    young_speed=(76.0, 4.0),
    senior_decel=(5.0, 1.5),
    young_decel=(4.0, 1.5),
    posted_limit: float = 75.0,
    n_baseline: int = 10,
    n_validation: int = 5,
    n_test: int = 10,
    trips: int = 2,
    points: int = 100,
    n_stops: int = 3,
    stop_trips: int = 10,
) -> Scenario:
    """Two cohorts at one posted limit, split into disjoint participant sets.

    Validation and test participants drive segments distinct from the
    baseline segments.
    """
    base_segs = tuple((f"I80-B{k}", posted_limit) for k in range(3))
    eval_segs = tuple((f"I29-V{k}", posted_limit) for k in range(2))

    def spec(cohort, n, prefix, segs, sub):
        mean, sd = senior_speed if cohort == "senior" else young_speed
        dmean, dsd = senior_decel if cohort == "senior" else young_decel
        return CohortSpec(cohort, n, trips, points, mean, sd, dmean, dsd, segs,
                          seed=seed * 100 + sub, id_prefix=prefix)

    specs = {
        "baseline": [spec("senior", n_baseline, "BS", base_segs, 1), spec("young", n_baseline, "BY", base_segs, 2)],
        "validation": [spec("senior", n_validation, "VS", eval_segs, 3)],
        "test": [spec("senior", n_test, "TS", eval_segs, 4), spec("young", n_test, "TY", eval_segs, 5)],
    }
    stops = make_intersections(n_stops)
    roster: list[Participant] = []
    out = {}
    for role, role_specs in specs.items():
        out[role] = [p for s in role_specs for p in generate_speed_traces(s)]
        out["stop_" + role] = [
            p for s in role_specs
            for p in generate_stop_approaches(replace(s, trips_per_participant=stop_trips), stops)
        ]
        roster += [p for s in role_specs for p in generate_roster(s)]
    return Scenario(roster=roster, stops=stops, **out)
