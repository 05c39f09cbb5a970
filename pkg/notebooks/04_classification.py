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

# # Separating range and held-out classification
#
# Full speed-adherence run on one synthetic scenario: baselines for each
# cohort, KS comparison, the separating percentile range chosen on senior
# validation drivers, then labels for held-out drivers.

from drivebaseline.baseline import MetricKey, build_baseline, compare_baselines, group_cdfs
from drivebaseline.classify import evaluate_accuracy, objective_table, optimize_percentile_range
from drivebaseline.synthgen import make_scenario
from drivebaseline.telemetry import speed_samples

metric = MetricKey("speed_adherence", 75.0)
sc = make_scenario(seed=7)
cohort = {p.participant_id: p.cohort for p in sc.roster}
base = speed_samples(sc.baseline, 75.0)
curves = {c: build_baseline([s for s in base if cohort[s.participant_id] == c], metric, c) for c in ("senior", "young")}
compare_baselines(curves["senior"], curves["young"])

# The objective rewards ranges where validation seniors sit closer to the
# senior baseline than to the young one.

val = group_cdfs((s.participant_id, s.value) for s in speed_samples(sc.validation, 75.0))
table = objective_table(list(val.values()), curves["senior"], curves["young"])
sorted(table.items(), key=lambda kv: -kv[1])[:5]

rng = optimize_percentile_range(list(val.values()), curves["senior"], curves["young"])
rng

tests = group_cdfs((s.participant_id, s.value) for s in speed_samples(sc.test, 75.0))
acc = evaluate_accuracy([(pid, c, cohort[pid]) for pid, c in tests.items()], curves["senior"], curves["young"], rng)
for r in acc.results[:6]:
    print(r.participant_id, r.true_cohort, r.label, round(r.d_senior, 2), round(r.d_young, 2))
acc.n_correct, acc.n_total, acc.accuracy
