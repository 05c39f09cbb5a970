"""Full CLI pipeline (speed and deceleration) run in-process."""

from drivebaseline.cli import main


def pipeline_steps(out):
    o = str(out)
    roster = f"{o}/roster.csv"
    steps = [["synth"], ["ingest", "--drives", f"{o}/baseline_drives.csv", "--roster", roster]]
    for metric, slug, base_in, val_in, test_in in (
        ("speed:75", "speed75", f"{o}/baseline_drives_clean.csv", f"{o}/validation_drives.csv", f"{o}/test_drives.csv"),
        ("decel", "decel", f"{o}/stop_baseline_decel.csv", f"{o}/stop_validation_decel.csv", f"{o}/stop_test_decel.csv"),
    ):
        if metric == "decel":
            for role in ("baseline", "validation", "test"):
                steps.append(["ingest", "--no-filter", "--drives", f"{o}/stop_{role}_drives.csv"])
                steps.append(["extract-stops", "--drives", f"{o}/stop_{role}_drives_clean.csv",
                              "--stops", f"{o}/stops.csv", "--name", f"stop_{role}"])
        senior, young = f"{o}/baseline_{slug}_senior.csv", f"{o}/baseline_{slug}_young.csv"
        for cohort in ("senior", "young"):
            steps.append(["baseline", "--metric", metric, "--cohort", cohort, "--input", base_in, "--roster", roster])
        steps.append(["kstest", "--senior", senior, "--young", young])
        steps.append(["optimize-range", "--senior", senior, "--young", young, "--input", val_in, "--roster", roster])
        steps.append(["classify", "--senior", senior, "--young", young, "--range", f"{o}/range_{slug}.csv",
                      "--input", test_in, "--roster", roster])
    return steps


def run_pipeline(out, seed=3, with_report=True):
    """Run every stage into ``out``; return the list of exit codes."""
    codes = []
    for step in pipeline_steps(out):
        extra = ["--seed", str(seed)] if step == ["synth"] else []
        codes.append(main(["--out-dir", str(out)] + step + extra))
    if with_report:
        codes.append(main(["--out-dir", f"{out}/report", "report", "--artifacts", str(out)]))
    return codes
