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

# # Deceleration at stop intersections
#
# Synthetic drivers approach three stop signs and brake to a halt. The
# approach trace starts at buffer entry and ends at the first point at or
# below the stop speed. Each consecutive pair of points gives one
# deceleration value in ft/s^2.

import numpy as np

from drivebaseline.geo import compute_deceleration, deceleration_samples, extract_approach_traces
from drivebaseline.synthgen import CohortSpec, generate_stop_approaches, make_intersections
from drivebaseline.telemetry import split_trips

stops = make_intersections(3)
senior = CohortSpec("senior", n_participants=5, trips_per_participant=4, decel_mean=5.0, decel_sd=1.5, seed=1)
points = generate_stop_approaches(senior, stops)
traces = extract_approach_traces(split_trips(points), stops, v_stop=5.0)
len(traces), len(traces[0].points)

events = [e for tr in traces for e in compute_deceleration(tr)]
e = events[0]
e.v1, e.v2, e.dt, e.a

# Every event satisfies a * dt = v2 - v1 exactly up to rounding.

max(abs(e.a * e.dt - (e.v2 - e.v1)) for e in events)

# Magnitudes feed the deceleration baseline. The generator draws per-step
# braking from N(5, 1.5) floored at 0.5 ft/s^2, and the last step of each
# approach is cut short by the stop speed.

mags = np.array([s.value for s in deceleration_samples(events)])
mags.mean(), np.percentile(mags, [10, 50, 90])
