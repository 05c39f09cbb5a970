import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drivebaseline.errors import ValidationError
from drivebaseline.geo import (
    MPH_TO_FTPS,
    ApproachTrace,
    StopIntersection,
    compute_deceleration,
    deceleration_samples,
    extract_approach_traces,
    geodesic_distance,
    load_stop_intersections,
)
from drivebaseline.telemetry import DrivePoint

import oracles

LAT0, LON0 = 41.0, -96.0
M_PER_DEG_LON = math.pi * 6_371_000 / 180 * math.cos(math.radians(LAT0))

lat_st = st.floats(-89.9, 89.9)
lon_st = st.floats(-179.9, 179.9)


def east(m):
    return LON0 + m / M_PER_DEG_LON


def line_trip(speeds, spacing_m=10.0, pid="P1", trip="T1", t0=0):
    return [DrivePoint(pid, trip, t0 + i, LAT0, east(i * spacing_m), float(v), "other", "S", 25.0)
            for i, v in enumerate(speeds)]


class TestLoadStops:
    def test_many_rows(self):
        text = "intersection_id,lat,lon\n" + "".join(f"X{i},41.{i:03d},-96.0\n" for i in range(75))
        assert len(load_stop_intersections(io.StringIO(text))) == 75

    def test_empty(self):
        assert load_stop_intersections(io.StringIO("intersection_id,lat,lon,radius_m\n")) == []

    def test_radius_default_and_override(self):
        text = "intersection_id,lat,lon,radius_m\nA,41,-96,\nB,41,-95,25\n"
        a, b = load_stop_intersections(io.StringIO(text), default_radius=80)
        assert a.buffer_radius == 80 and b.buffer_radius == 25

    def test_duplicate_id(self):
        with pytest.raises(ValidationError, match="'X1'"):
            load_stop_intersections(io.StringIO("intersection_id,lat,lon\nX1,41,-96\nX1,42,-96\n"))

    def test_bad_radius(self):
        with pytest.raises(ValidationError):
            StopIntersection("A", 41, -96, 0)


class TestGeodesic:
    def test_identity(self):
        assert geodesic_distance((0, 0), (0, 0)) == 0

    def test_one_degree_on_equator(self):
        # pi * 6371000 / 180
        assert geodesic_distance((0, 0), (0, 1)) == pytest.approx(111194.9, abs=0.1)

    @given(lat_st, lon_st, lat_st, lon_st)
    def test_symmetric_and_matches_cosine_law(self, a, b, c, d):
        d12 = geodesic_distance((a, b), (c, d))
        assert d12 == geodesic_distance((c, d), (a, b))
        assert d12 >= 0
        if d12 > 1000:  # law of cosines loses precision at short range
            assert d12 == pytest.approx(oracles.haversine_reference((a, b), (c, d)), rel=1e-6)

    @given(lat_st, lon_st, lat_st, lon_st, lat_st, lon_st)
    def test_triangle_inequality(self, a, b, c, d, e, f):
        p, q, r = (a, b), (c, d), (e, f)
        lhs = geodesic_distance(p, r)
        assert lhs <= (geodesic_distance(p, q) + geodesic_distance(q, r)) * (1 + 1e-6) + 1e-6


class TestExtract:
    stop = StopIntersection("X", LAT0, east(300), 65.0)

    def test_slowing_trip_ends_at_first_slow_point(self):
        speeds = [30] * 26 + [20, 12, 6, 4, 0, 0] + [10] * 20
        trip = line_trip(speeds, spacing_m=10)
        (tr,) = extract_approach_traces([trip], [self.stop], v_stop=5)
        assert tr.points[-1].speed == 4
        assert all(p.speed > 5 for p in tr.points[:-1])
        assert tr.points[0].t == 24  # 240 m from origin, first point within 65 m of 300 m

    def test_never_entering(self):
        trip = line_trip([30] * 10)
        assert extract_approach_traces([trip], [self.stop]) == []

    def test_two_disjoint_buffers(self):
        stops = [StopIntersection("A", LAT0, east(200), 55), StopIntersection("B", LAT0, east(700), 55)]
        trip = line_trip([40] * 100, spacing_m=10)
        traces = extract_approach_traces([trip], stops)
        assert [t.intersection_id for t in traces] == ["A", "B"]
        # no slow point: each trace runs to buffer exit, points at -50..+50 m from the centre
        assert [len(t.points) for t in traces] == [11, 11]

    def test_entry_already_slow_gives_no_trace(self):
        trip = line_trip([3] * 60, spacing_m=10)
        assert extract_approach_traces([trip], [self.stop]) == []

    def test_points_within_radius_and_order_independent(self, rng):
        stops = [StopIntersection(f"S{k}", LAT0, east(150 + 400 * k), 70) for k in range(3)]
        trips = [line_trip(rng.uniform(0, 40, 150), spacing_m=8, trip=f"T{j}") for j in range(6)]
        traces = extract_approach_traces(trips, stops)
        for tr in traces:
            stop = next(s for s in stops if s.intersection_id == tr.intersection_id)
            assert len(tr.points) >= 2
            assert all(geodesic_distance((p.lat, p.lon), (stop.lat, stop.lon)) <= stop.buffer_radius for p in tr.points)
            assert all(b.t > a.t for a, b in zip(tr.points, tr.points[1:]))
        permuted = extract_approach_traces(trips[::-1], stops)
        assert set(permuted) == set(traces) and len(permuted) == len(traces)


class TestDeceleration:
    def trace(self, speeds_ftps, times):
        pts = tuple(DrivePoint("P", "T", t, LAT0, LON0, v / MPH_TO_FTPS, "other", "X") for v, t in zip(speeds_ftps, times))
        return ApproachTrace("P", "T", "X", pts)

    def test_direct_evaluation(self):
        (ev,) = compute_deceleration(self.trace([30, 20], [0, 2]))
        assert ev.a == pytest.approx(-5.0, abs=1e-12)
        assert ev.dt == 2 and ev.v1 == pytest.approx(30) and ev.v2 == pytest.approx(20)

    def test_constant_speed_not_emitted(self):
        assert compute_deceleration(self.trace([30, 30], [0, 1])) == []
        (step,) = compute_deceleration(self.trace([30, 30], [0, 1]), only_decelerations=False)
        assert step.a == 0

    def test_non_increasing_time(self):
        with pytest.raises(ValidationError):
            compute_deceleration(self.trace([30, 20, 10], [0, 1, 1]))

    def test_mph_conversion(self):
        tr = ApproachTrace("P", "T", "X", tuple(line_trip([30, 15], trip="T")))
        (ev,) = compute_deceleration(tr)
        assert ev.a == pytest.approx(-22.0, abs=1e-12)  # 15 mph/s = 22 ft/s^2

    def test_samples_are_magnitudes(self):
        evs = compute_deceleration(self.trace([30, 20, 25, 5], [0, 1, 2, 3]), only_decelerations=False)
        assert [s.value for s in deceleration_samples(evs)] == pytest.approx([10.0, 20.0])

    def test_telescoping(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 30))
            speeds = rng.uniform(0, 60, n)
            times = np.cumsum(rng.integers(1, 4, n))
            steps = compute_deceleration(self.trace(speeds, times), only_decelerations=False)
            total = sum(e.a * e.dt for e in steps)
            assert total == pytest.approx(steps[-1].v2 - steps[0].v1, abs=1e-9)
