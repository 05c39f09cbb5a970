"""Flat ``key=value`` pipeline configuration with bounds checking."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Mapping

from .errors import ValidationError

ENV_VAR = "DRIVEBASELINE_CONFIG"


def _between(lo=None, hi=None, lo_open=False, hi_open=False):
    def check(v):
        if lo is not None and (v <= lo if lo_open else v < lo):
            return False
        if hi is not None and (v >= hi if hi_open else v > hi):
            return False
        return True
    return check


# key -> (type, default, bound check, human-readable bound)
SCHEMA = {
    "telemetry.senior_age_years": (int, 65, _between(16, 120), "16..120"),
    "telemetry.road_class": (str, "interstate", lambda v: v in ("interstate", "other"), "interstate|other"),
    "telemetry.min_limit_mph": (float, 65.0, _between(0, lo_open=True), "> 0"),
    "telemetry.min_points_per_segment": (int, 200, _between(1), ">= 1"),
    "telemetry.min_participants_per_segment": (int, 3, _between(1), ">= 1"),
    "geo.buffer_radius_m": (float, 60.0, _between(0, lo_open=True), "> 0"),
    "geo.v_stop_mph": (float, 5.0, _between(0), ">= 0"),
    "baseline.tau_segment": (float, 0.25, _between(0, 1, lo_open=True), "(0, 1]"),
    "baseline.tau_participant": (float, 0.25, _between(0, 1, lo_open=True), "(0, 1]"),
    "baseline.max_iter": (int, 10, _between(0), ">= 0"),
    "baseline.alpha": (float, 0.05, _between(0, 1, True, True), "(0, 1)"),
    "classify.min_width": (int, 10, _between(1, 98), "1..98"),
    "classify.step": (int, 1, _between(1, 98), "1..98"),
    "classify.exclude_validation_outliers": (bool, True, lambda v: True, "true|false"),
    "classify.tau_validation": (float, 0.25, _between(0, 1, lo_open=True), "(0, 1]"),
    "synth.seed": (int, 0, _between(0), ">= 0"),
    "paths.out_dir": (str, "out", lambda v: bool(v), "non-empty"),
}


def _coerce(key, typ, raw):
    if isinstance(raw, typ) and not (typ is int and isinstance(raw, bool)):
        return raw
    text = str(raw).strip()
    try:
        if typ is bool:
            if text.lower() in ("true", "1", "yes", "on"):
                return True
            if text.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError
        if typ is int:
            return int(text)
        if typ is float:
            return float(text)
        return text
    except ValueError:
        raise ValidationError(f"{key}: cannot parse {text!r} as {typ.__name__}", key=key) from None


@dataclass(frozen=True)
class PipelineConfig:
    values: Mapping[str, object]

    def __getitem__(self, key):
        return self.values[key]

    def echo(self) -> dict[str, str]:
        """Values rendered for output headers, excluding paths."""
        out = {}
        for key in sorted(self.values):
            if key.startswith("paths."):
                continue
            v = self.values[key]
            out[key] = str(v).lower() if isinstance(v, bool) else str(v)
        return out


def make_config(overrides: Mapping[str, object] | None = None) -> PipelineConfig:
    values = {k: spec[1] for k, spec in SCHEMA.items()}
    for key, raw in (overrides or {}).items():
        if key not in SCHEMA:
            raise ValidationError(f"unknown config key {key!r}", key=key)
        typ, _, check, bound = SCHEMA[key]
        val = _coerce(key, typ, raw)
        if not check(val):
            raise ValidationError(f"{key}={val} outside {bound}", key=key)
        values[key] = val
    return PipelineConfig(values)


def parse_config_text(text: str) -> dict[str, str]:
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValidationError(f"config line {n}: expected key=value", key=f"line{n}")
        out[key.strip()] = val.strip()
    return out


def load_config(path=None, overrides: Mapping[str, object] | None = None) -> PipelineConfig:
    """Read the config file (``$DRIVEBASELINE_CONFIG`` wins over ``path``)
    and apply ``overrides`` on top."""
    path = os.environ.get(ENV_VAR) or path
    raw: dict[str, object] = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            raw.update(parse_config_text(fh.read()))
    raw.update(overrides or {})
    return make_config(raw)


def write_config(cfg: PipelineConfig, fh):
    for key in sorted(cfg.values):
        v = cfg.values[key]
        fh.write(f"{key}={str(v).lower() if isinstance(v, bool) else v}\n")

