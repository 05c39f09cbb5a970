"""Command-line driver for the pipeline stages.

Exit codes: 0 success, 1 validation error, 2 I/O failure, 64 usage error.
Errors are reported on stderr as one ``error kind=... key=... msg=...`` line.
"""

from __future__ import annotations

import argparse
import contextlib
import io
import logging
import os
import sys
from pathlib import Path

from . import baseline as bl
from . import classify as cl
from . import geo, report, synthgen, telemetry
from .config import PipelineConfig, load_config
from .errors import ValidationError

log = logging.getLogger("drivebaseline")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_USAGE = 0, 1, 2, 64
LOCK_NAME = ".drivebaseline.lock"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------- output plumbing


@contextlib.contextmanager
def _locked(out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise OSError(f"output directory {out_dir} is locked by another run ({LOCK_NAME})") from None
    os.close(fd)
    try:
        yield
    finally:
        lock.unlink(missing_ok=True)


def write_outputs(out_dir: Path, files: dict[str, str]) -> list[Path]:
    """Write every file to a temp name first, then rename all of them, so a
    failure leaves no partial outputs behind."""
    staged = []
    try:
        for name, content in files.items():
            tmp = out_dir / f".{name}.tmp"
            with open(tmp, "w", encoding="utf-8", newline="") as fh:
                fh.write(content)
            staged.append((tmp, out_dir / name))
    except BaseException:
        for tmp, _ in staged:
            tmp.unlink(missing_ok=True)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)
    return [final for _, final in staged]


def _points_to_csv(points, echo) -> str:
    buf = io.StringIO()
    telemetry.write_drive_records(points, buf, [f"config {k}={v}" for k, v in sorted(echo.items())])
    return buf.getvalue()


def _load_points(path):
    points, issues = telemetry.load_drive_file(path)
    for issue in issues:
        log.warning("%s:%d %s: %s", path, issue.line, issue.column, issue.message)
    return points


def _load_roster(path, cfg):
    if path is None:
        return None
    with open(path, "rb") as fh:
        return telemetry.load_roster(fh, cfg["telemetry.senior_age_years"])


def _load_curve(path) -> bl.BaselineCurve:
    with open(path, encoding="utf-8") as fh:
        return bl.load_baseline(fh)


def _kpi_samples(path, metric: bl.MetricKey, cfg):
    if metric.kpi == "stop_deceleration":
        return report.read_decel_samples(path)
    points, _ = telemetry.clean(_load_points(path))
    points = [p for p in points if p.road_class == cfg["telemetry.road_class"]]
    return telemetry.speed_samples(points, metric.posted_limit)


def _participant_cdfs(samples, roster, cohort=None):
    if cohort is not None and roster is not None:
        samples = [s for s in samples if s.participant_id in roster and roster[s.participant_id].cohort == cohort]
    return bl.group_cdfs((s.participant_id, s.value) for s in samples)


def _stem(path) -> str:
    name = Path(path).name
    for suffix in (".csv", ".jsonl", ".json"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return name


# ---------------------------------------------------------------- subcommands


def cmd_synth(args, cfg: PipelineConfig):
    sc = synthgen.make_scenario(cfg["synth.seed"])
    echo = cfg.echo()
    files = {}
    for role in ("baseline", "validation", "test"):
        files[f"{role}_drives.csv"] = _points_to_csv(getattr(sc, role), echo)
        files[f"stop_{role}_drives.csv"] = _points_to_csv(getattr(sc, "stop_" + role), echo)
    buf = io.StringIO()
    telemetry.write_roster(sc.roster, buf)
    files["roster.csv"] = buf.getvalue()
    buf = io.StringIO()
    geo.write_stop_intersections(sc.stops, buf)
    files["stops.csv"] = buf.getvalue()
    return files


def cmd_ingest(args, cfg):
    points, issues = telemetry.load_drive_file(args.drives)
    roster = _load_roster(args.roster, cfg)
    cohorts = {pid: p.cohort for pid, p in roster.items()} if roster else None
    if args.no_filter:
        kept, rep = telemetry.clean(points)
        summaries = []
    else:
        kept, rep, summaries = telemetry.ingest(
            points,
            min_limit=cfg["telemetry.min_limit_mph"],
            road_class=cfg["telemetry.road_class"],
            min_points_per_segment=cfg["telemetry.min_points_per_segment"],
            min_participants_per_segment=cfg["telemetry.min_participants_per_segment"],
            cohorts=cohorts,
        )
    echo = cfg.echo()
    name = args.name or _stem(args.drives)
    lines = [f"rows_parsed={len(points)}", f"parse_issues={len(issues)}", f"rows_in={rep.rows_in}",
             f"rows_dropped_missing={rep.rows_dropped_missing}", f"rows_dropped_filter={rep.rows_dropped_filter}",
             f"rows_out={rep.rows_out}"] + [f"reason.{k}={v}" for k, v in rep.reasons.items()]
    seg_rows = [(s.segment_id, s.posted_limit, s.n_points, s.n_participants,
                 s.cohort_points.get("senior", 0), s.cohort_points.get("young", 0)) for s in summaries]
    issue_rows = [(i.line, i.column or "", i.message) for i in issues]
    return {
        f"{name}_clean.csv": _points_to_csv(kept, echo),
        f"{name}_clean_report.txt": report.header_lines(echo) + "".join(l + "\n" for l in lines),
        f"{name}_segments.csv": report.header_lines(echo) + report._table(
            seg_rows, ("segment_id", "posted_limit_mph", "n_points", "n_participants", "senior_points", "young_points")),
        f"{name}_issues.csv": report.header_lines(echo) + report._table(issue_rows, ("line", "column", "message")),
    }


def cmd_extract_stops(args, cfg):
    points, _ = telemetry.clean(_load_points(args.drives))
    with open(args.stops, "rb") as fh:
        stops = geo.load_stop_intersections(fh, cfg["geo.buffer_radius_m"])
    traces = geo.extract_approach_traces(telemetry.split_trips(points), stops, cfg["geo.v_stop_mph"])
    events = [e for tr in traces for e in geo.compute_deceleration(tr)]
    name = args.name or _stem(args.drives)
    return {f"{name}_decel.csv": report.format_decel_events(events, cfg.echo())}


def cmd_baseline(args, cfg):
    metric = bl.MetricKey.parse(args.metric)
    roster = _load_roster(args.roster, cfg)
    samples = _kpi_samples(args.input, metric, cfg)
    samples = [s for s in samples if s.participant_id in roster and roster[s.participant_id].cohort == args.cohort]
    curve = bl.build_baseline(samples, metric, args.cohort, cfg["baseline.tau_segment"],
                              cfg["baseline.tau_participant"], cfg["baseline.max_iter"])
    if not curve.identifiable and not args.force:
        raise ValidationError(
            f"baseline {metric}/{args.cohort} is not identifiable (max pairwise KS "
            f"{curve.max_pairwise_ks:.4f}); rerun with --force to emit it", key="identifiable")
    slug = report.metric_slug(metric)
    buf = io.StringIO()
    bl.save_baseline(curve, buf, cfg.echo())
    return {
        f"baseline_{slug}_{args.cohort}.csv": buf.getvalue(),
        f"anomalies_{slug}_{args.cohort}.csv": report.format_anomalies(curve, cfg.echo()),
    }


def cmd_kstest(args, cfg):
    senior, young = _load_curve(args.senior), _load_curve(args.young)
    res = bl.compare_baselines(senior, young, cfg["baseline.alpha"])
    return {f"kstest_{report.metric_slug(senior.metric)}.csv": report.format_ks(senior.metric, res, cfg.echo())}


def cmd_optimize_range(args, cfg):
    senior, young = _load_curve(args.senior), _load_curve(args.young)
    if senior.metric != young.metric:
        raise ValidationError(f"metric mismatch: {senior.metric} vs {young.metric}", key="metric")
    roster = _load_roster(args.roster, cfg)
    cdfs = _participant_cdfs(_kpi_samples(args.input, senior.metric, cfg), roster, "senior")
    excluded = {}
    if cfg["classify.exclude_validation_outliers"]:
        cdfs, excluded = cl.exclude_validation_outliers(cdfs, senior, cfg["classify.tau_validation"])
    rng = cl.optimize_percentile_range(list(cdfs.values()), senior, young,
                                       cfg["classify.min_width"], cfg["classify.step"])
    slug = report.metric_slug(senior.metric)
    return {f"range_{slug}.csv": report.format_range(senior.metric, rng, len(cdfs), excluded, cfg.echo())}


def cmd_classify(args, cfg):
    senior, young = _load_curve(args.senior), _load_curve(args.young)
    metric, rng = report.read_range(args.range)
    if not (senior.metric == young.metric == metric):
        raise ValidationError(f"metric mismatch among baselines and range ({metric})", key="metric")
    roster = _load_roster(args.roster, cfg)
    cdfs = _participant_cdfs(_kpi_samples(args.input, metric, cfg), roster)
    tests = []
    for pid, cdf in cdfs.items():
        truth = roster[pid].cohort if roster and pid in roster else None
        tests.append((pid, cdf, truth))
    acc = cl.evaluate_accuracy(tests, senior, young, rng)
    slug = report.metric_slug(metric)
    echo = cfg.echo()
    return {
        f"scatter_{slug}.csv": report.format_scatter(acc.results, echo, [f"metric={metric}"]),
        f"accuracy_{slug}.txt": report.format_accuracy(metric, acc, echo),
    }


def cmd_report(args, cfg):
    return report.emit_report(args.artifacts, cfg.echo())


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "extract-stops": cmd_extract_stops,
    "baseline": cmd_baseline,
    "kstest": cmd_kstest,
    "optimize-range": cmd_optimize_range,
    "classify": cmd_classify,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="drivebaseline", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value config file (overridden by $DRIVEBASELINE_CONFIG)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    parser.add_argument("--out-dir", help="output directory (default: config paths.out_dir)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("synth", help="write a seeded synthetic fixture")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("ingest", help="parse, clean and select drive records")
    p.add_argument("--drives", required=True)
    p.add_argument("--roster")
    p.add_argument("--name", help="output file prefix (default: input stem)")
    p.add_argument("--no-filter", action="store_true", help="clean only; skip road-class/limit/sufficiency selection")

    p = sub.add_parser("extract-stops", help="deceleration events at stop intersections")
    p.add_argument("--drives", required=True)
    p.add_argument("--stops", required=True)
    p.add_argument("--name")

    p = sub.add_parser("baseline", help="build one cohort baseline curve")
    p.add_argument("--metric", required=True, help="speed:<mph> or decel")
    p.add_argument("--cohort", required=True, choices=telemetry.COHORTS)
    p.add_argument("--input", required=True, help="drive CSV (speed) or *_decel.csv (decel)")
    p.add_argument("--roster", required=True)
    p.add_argument("--force", action="store_true", help="emit even a non-identifiable baseline")

    p = sub.add_parser("kstest", help="compare senior and young baselines")
    p.add_argument("--senior", required=True)
    p.add_argument("--young", required=True)

    p = sub.add_parser("optimize-range", help="search the separating percentile range")
    p.add_argument("--senior", required=True)
    p.add_argument("--young", required=True)
    p.add_argument("--input", required=True, help="validation drives or decel events")
    p.add_argument("--roster")

    p = sub.add_parser("classify", help="label test participants and score accuracy")
    p.add_argument("--senior", required=True)
    p.add_argument("--young", required=True)
    p.add_argument("--range", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--roster")

    p = sub.add_parser("report", help="collect artifacts into plot-data files")
    p.add_argument("--artifacts", required=True, help="directory holding pipeline artifacts")
    return parser


def _diagnostic(kind, exc, key=None):
    msg = str(exc).replace("\n", " ").replace('"', "'")
    print(f'error kind={kind} key={key or "-"} msg="{msg}"', file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"drivebaseline: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return exc.code or 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = {}
        for item in args.set:
            key, sep, val = item.partition("=")
            if not sep:
                raise ValidationError(f"--set expects KEY=VALUE, got {item!r}", key=item)
            overrides[key.strip()] = val.strip()
        if getattr(args, "seed", None) is not None:
            overrides["synth.seed"] = args.seed
        cfg = load_config(args.config, overrides)
        out_dir = Path(args.out_dir or cfg["paths.out_dir"])
        with _locked(out_dir):
            files = COMMANDS[args.command](args, cfg)
            written = write_outputs(out_dir, files)
        for path in written:
            print(path)
    except ValidationError as exc:
        _diagnostic("validation", exc, exc.key)
        return EXIT_VALIDATION
    except OSError as exc:
        _diagnostic("io", exc, getattr(exc, "filename", None))
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
