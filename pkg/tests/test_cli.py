import csv
import os
import shutil

import pytest

from drivebaseline.cli import LOCK_NAME, main
from drivebaseline.config import ENV_VAR

from pipeline import run_pipeline


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    codes = run_pipeline(out, seed=3)
    assert set(codes) == {0}
    return out


def rows(path):
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def test_pipeline_outputs(artifacts):
    for slug in ("speed75", "decel"):
        (ks,) = rows(artifacts / f"kstest_{slug}.csv")
        assert ks["significant"] == "true"
        assert (artifacts / f"accuracy_{slug}.txt").exists()
    report = artifacts / "report"
    assert sorted(os.listdir(report)) == ["cdf_curves.csv", "range.csv", "scatter.csv", "summary.txt"]
    assert "# config baseline.tau_segment=0.25" in (report / "cdf_curves.csv").read_text()


def test_no_temp_or_lock_left_behind(artifacts):
    assert not [n for n in os.listdir(artifacts) if n.endswith(".tmp") or n == LOCK_NAME]


def test_kstest_identical_files(artifacts, tmp_path):
    base = str(artifacts / "baseline_speed75_senior.csv")
    assert main(["--out-dir", str(tmp_path), "kstest", "--senior", base, "--young", base]) == 0
    (ks,) = rows(tmp_path / "kstest_speed75.csv")
    assert float(ks["d"]) == 0 and float(ks["p_value"]) == 1 and ks["significant"] == "false"


def test_kstest_metric_mismatch(artifacts, tmp_path, capsys):
    code = main(["--out-dir", str(tmp_path), "kstest", "--senior", str(artifacts / "baseline_speed75_senior.csv"),
                 "--young", str(artifacts / "baseline_decel_young.csv")])
    assert code == 1
    assert "kind=validation" in capsys.readouterr().err
    assert os.listdir(tmp_path) == []


def test_report_partial(artifacts, tmp_path):
    for name in ("baseline_speed75_senior.csv", "baseline_speed75_young.csv"):
        shutil.copy(artifacts / name, tmp_path / name)
    out = tmp_path / "rep"
    assert main(["--out-dir", str(out), "report", "--artifacts", str(tmp_path)]) == 0
    assert os.listdir(out) == ["cdf_curves.csv"]


def test_report_missing_range(artifacts, tmp_path, capsys):
    for name in ("baseline_speed75_senior.csv", "scatter_speed75.csv", "accuracy_speed75.txt"):
        shutil.copy(artifacts / name, tmp_path / name)
    assert main(["--out-dir", str(tmp_path / "rep"), "report", "--artifacts", str(tmp_path)]) == 1
    assert "range_speed75.csv" in capsys.readouterr().err


def test_report_no_baselines(tmp_path):
    assert main(["--out-dir", str(tmp_path / "rep"), "report", "--artifacts", str(tmp_path)]) == 1


def test_report_is_deterministic(artifacts, tmp_path):
    assert main(["--out-dir", str(tmp_path), "report", "--artifacts", str(artifacts)]) == 0
    for name in os.listdir(tmp_path):
        assert (tmp_path / name).read_bytes() == (artifacts / "report" / name).read_bytes()


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["kstest", "--senior", "a.csv"], ["synth", "--seed", "x"]])
def test_usage_errors(argv, tmp_path):
    assert main(["--out-dir", str(tmp_path)] + argv) == 64


def test_missing_input_is_io_error(tmp_path, capsys):
    code = main(["--out-dir", str(tmp_path), "ingest", "--drives", str(tmp_path / "nope.csv")])
    assert code == 2
    assert "kind=io" in capsys.readouterr().err


@pytest.mark.parametrize("setting,key", [
    ("baseline.tau_segment=1.5", "baseline.tau_segment"),
    ("classify.min_width=0", "classify.min_width"),
    ("baseline.max_iter=ten", "baseline.max_iter"),
    ("no.such.key=1", "no.such.key"),
])
def test_config_validation_names_key(setting, key, tmp_path, capsys):
    assert main(["--set", setting, "--out-dir", str(tmp_path), "synth"]) == 1
    assert f"key={key}" in capsys.readouterr().err


def test_env_config_wins_over_flag(tmp_path, monkeypatch):
    flag_cfg, env_cfg = tmp_path / "flag.cfg", tmp_path / "env.cfg"
    flag_cfg.write_text("synth.seed=1\n")
    env_cfg.write_text("# seed from the environment\nsynth.seed=9\n")
    monkeypatch.setenv(ENV_VAR, str(env_cfg))
    out = tmp_path / "out"
    assert main(["--config", str(flag_cfg), "--out-dir", str(out), "synth"]) == 0
    assert "# config synth.seed=9" in (out / "baseline_drives.csv").read_text()


def test_held_lock_refuses_to_run(tmp_path, capsys):
    (tmp_path / LOCK_NAME).write_text("")
    assert main(["--out-dir", str(tmp_path), "synth"]) == 2
    assert "locked" in capsys.readouterr().err
    assert os.listdir(tmp_path) == [LOCK_NAME]


def test_non_identifiable_baseline_needs_force(tmp_path):
    drives = tmp_path / "d.csv"
    header = "participant_id,trip_id,t,lat,lon,speed_mph,road_class,segment_id,posted_limit_mph\n"
    body = "".join(f"P1,T{s},{i},41.0,-96.0,{base + i % 3},interstate,{s},75\n"
                   for s, base in (("A", 60), ("B", 90)) for i in range(5))
    drives.write_text(header + body)
    roster = tmp_path / "r.csv"
    roster.write_text("participant_id,age,sex\nP1,70,female\n")
    argv = ["--set", "baseline.max_iter=0", "--out-dir", str(tmp_path / "o"), "baseline", "--metric", "speed:75",
            "--cohort", "senior", "--input", str(drives), "--roster", str(roster)]
    assert main(argv) == 1
    assert main(argv + ["--force"]) == 0
    assert (tmp_path / "o" / "baseline_speed75_senior.csv").exists()
