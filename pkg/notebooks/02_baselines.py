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

# # Cohort baselines with leave-one-out anomaly removal
#
# One synthetic cohort drives four segments. Two segments are planted off
# profile, as is one participant. The baseline builder should drop them and
# pool what is left.

import numpy as np

from drivebaseline.baseline import MetricKey, build_baseline, leave_one_out_distances, group_cdfs
from drivebaseline.synthgen import CohortSpec, generate_speed_traces
from drivebaseline.telemetry import speed_samples

segments = tuple((f"I80-E{k}", 75.0) for k in range(1, 5))
spec = CohortSpec("senior", n_participants=8, trips_per_participant=4, segments=segments, seed=11,
                  segment_offsets={"I80-E3": 12.0, "I80-E4": -12.0}, participant_offsets={"S005": 9.0})
samples = speed_samples(generate_speed_traces(spec), 75.0)
len(samples)

# Leave-one-out KS distances at the segment level, before any removal:

loo = leave_one_out_distances(group_cdfs((s.segment_id, s.value) for s in samples))
{k: round(v, 3) for k, v in loo.items()}

curve = build_baseline(samples, MetricKey("speed_adherence", 75.0), "senior")
for flag in curve.exclusions.flagged:
    print(flag.level, flag.group_id, "iteration", flag.iteration, "D =", round(flag.ks_distance, 3))

curve.segments, curve.participants, curve.cdf.n, curve.identifiable

# The surviving pool sits close to the planted 72 mph mean.

np.average(curve.cdf.values, weights=curve.cdf.counts)
