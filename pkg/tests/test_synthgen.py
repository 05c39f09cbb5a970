import io

import numpy as np
import pytest

from drivebaseline.baseline import build_baseline, compare_baselines, MetricKey
from drivebaseline.errors import ValidationError
from drivebaseline.geo import compute_deceleration, extract_approach_traces
from drivebaseline.synthgen import (
    CohortSpec,
    generate_roster,
    generate_speed_traces,
    generate_stop_approaches,
    make_intersections,
    make_scenario,
    truncated_normal,
)
from drivebaseline.telemetry import (
    clean,
    filter_select,
    parse_drive_records,
    speed_samples,
    split_trips,
    write_drive_records,
)


def test_same_seed_same_output():
    spec = CohortSpec("senior", seed=7)
    assert generate_speed_traces(spec) == generate_speed_traces(spec)
    assert generate_roster(spec) == generate_roster(spec)
    assert generate_speed_traces(spec) != generate_speed_traces(CohortSpec("senior", seed=8))


def test_point_count():
    spec = CohortSpec("young", n_participants=3, trips_per_participant=2, points_per_trip=100)
    assert len(generate_speed_traces(spec)) == 600


def test_truncated_normal_mean(rng):
    n = 10_000
    xs = truncated_normal(rng, 72.0, 2.0, n)
    assert xs.min() >= 0
    assert abs(xs.mean() - 72.0) <= 3 * 2.0 / np.sqrt(n)


def test_zero_sd_is_constant(rng):
    assert truncated_normal(rng, 70.0, 0.0, 5).tolist() == [70.0] * 5


def test_roster_ages_follow_cohort():
    for cohort in ("senior", "young"):
        roster = generate_roster(CohortSpec(cohort, n_participants=30))
        assert {p.cohort for p in roster} == {cohort}


def test_survives_parse_clean_filter():
    spec = CohortSpec("senior", n_participants=6, trips_per_participant=2)
    pts = generate_speed_traces(spec)
    buf = io.StringIO()
    write_drive_records(pts, buf)
    back, issues = parse_drive_records(io.StringIO(buf.getvalue()))
    assert issues == [] and back == pts
    cleaned, rep = clean(back)
    assert rep.rows_dropped_missing == 0
    kept, _ = filter_select(cleaned)
    assert len(kept) == len(pts)


def test_planted_offsets():
    spec = CohortSpec("senior", n_participants=6, speed_sd=0.0, segment_offsets={"I80-E2": 10.0},
                      participant_offsets={"S000": -3.0})
    by_key = {(p.participant_id, p.segment_id): p.speed for p in generate_speed_traces(spec)}
    assert by_key[("S001", "I80-E2")] == 82.0
    assert by_key[("S000", "I80-E1")] == 69.0
    assert by_key[("S002", "I80-E3")] == 72.0


def test_stop_approaches_extract_to_braking_events():
    stops = make_intersections(3)
    spec = CohortSpec("young", n_participants=2, trips_per_participant=2, decel_sd=0.0, decel_mean=4.0)
    pts = generate_stop_approaches(spec, stops)
    traces = extract_approach_traces(split_trips(pts), stops, v_stop=5)
    assert len(traces) == 2 * 2 * 3
    assert {t.intersection_id for t in traces} == {s.intersection_id for s in stops}
    for tr in traces:
        assert tr.points[-1].speed <= 5
        events = compute_deceleration(tr)
        assert events and all(e.a == pytest.approx(-4.0) for e in events[:-1])


def test_stop_approach_needs_intersections():
    with pytest.raises(ValidationError):
        generate_stop_approaches(CohortSpec("senior"), [])


@pytest.mark.parametrize("kwargs", [{"n_participants": 0}, {"speed_sd": -1}, {"cohort": "teen"}, {"segments": ()}])
def test_spec_validation(kwargs):
    base = {"cohort": "senior"} | kwargs
    with pytest.raises(ValidationError):
        CohortSpec(**base)


def test_scenario_roles_are_disjoint():
    sc = make_scenario(1)
    ids = {role: {p.participant_id for p in getattr(sc, role)} for role in ("baseline", "validation", "test")}
    assert not ids["baseline"] & ids["validation"] and not ids["baseline"] & ids["test"]
    assert not ids["validation"] & ids["test"]
    assert {p.participant_id for p in sc.roster} == set().union(*ids.values())
    assert not {p.segment_id for p in sc.baseline} & {p.segment_id for p in sc.test}


def test_planted_separation_is_detected():
    metric = MetricKey("speed_adherence", 75.0)
    hits = 0
    for seed in range(20):
        sc = make_scenario(seed, n_validation=1, n_test=1, stop_trips=1, n_stops=1)
        cohort = {p.participant_id: p.cohort for p in sc.roster}
        samples = speed_samples(sc.baseline, 75.0)
        curves = {c: build_baseline([s for s in samples if cohort[s.participant_id] == c], metric, c)
                  for c in ("senior", "young")}
        hits += compare_baselines(curves["senior"], curves["young"]).significant
    assert hits == 20
