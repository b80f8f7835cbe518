"""``geo``: run transport experiments from a JSON config and write a report.

Exit status: 0 when every check passes, 1 when any check fails, 2 for an
invalid configuration.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import re
import sys
import time
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, ConfigurationError, DomainError, GeometryError
from .experiments import DEFAULT_TOLERANCES, EXPERIMENTS, RUNNERS, Setup, applicable
from .models import build_model, canonical_params, default_region, parse_model_name
from .reports import GeometryReport

SCHEMA_VERSION = 1
CHOICES = (*EXPERIMENTS, "sweep")
KNOWN_KEYS = {"schema", "model", "experiment", "grid", "point", "steps", "fd_step", "h_sequence",
              "tolerances", "seed", "output"}
FORMATS = ("json", "csv")


class ConfigError(Exception):
    """Invalid configuration; ``line`` is the 1-based line in the config text (0 if unknown)."""

    def __init__(self, message, line=0, source="<config>"):
        super().__init__(message)
        self.message = message
        self.line = line
        self.source = source

    def __str__(self):
        return f"{self.source}:{self.line}: {self.message}"


@dataclass
class ExperimentConfig:
    model: str
    model_params: dict
    experiment: str
    region: tuple | None
    resolution: int
    point: tuple | None
    steps: int | None
    fd_step: float | None
    h_sequence: tuple | None
    tolerances: dict
    seed: int
    out: str | None
    fmt: str

    def as_dict(self):
        return {
            "model": self.model,
            "model_params": self.model_params,
            "experiment": self.experiment,
            "region": [list(iv) for iv in self.region] if self.region else None,
            "resolution": self.resolution,
            "point": list(self.point) if self.point else None,
            "steps": self.steps,
            "fd_step": self.fd_step,
            "h_sequence": list(self.h_sequence) if self.h_sequence else None,
            "tolerances": dict(sorted(self.tolerances.items())),
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _key_line(text, key):
    """Line of the first ``"key":`` in ``text``; 1 if not found."""
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


def _real(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool) and np.isfinite(value)


def _integer(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _model_spec(raw, fail):
    if isinstance(raw, str):
        try:
            return parse_model_name(raw)
        except ConfigurationError as exc:
            fail("model", str(exc))
    if isinstance(raw, dict) and isinstance(raw.get("name"), str):
        params = raw.get("params", {})
        if not isinstance(params, dict):
            fail("model", "model params must be an object")
        return raw["name"], params
    fail("model", "model must be a name like \"sphere\" or {\"name\": ..., \"params\": {...}}")


def load_config(text, source="<config>", experiment=None, overrides=None):
    """Validate config text and merge command-line overrides into an :class:`ExperimentConfig`."""
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}

    def fail(key, message):
        raise ConfigError(message, _key_line(text, key) if key else 1, source)

    try:
        doc = json.loads(text) if text.strip() else {"schema": SCHEMA_VERSION}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno, source) from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object", 1, source)
    for key in doc:
        if key not in KNOWN_KEYS:
            fail(key, f"unknown field {key!r}")
    if doc.get("schema") != SCHEMA_VERSION:
        fail("schema", f"\"schema\" must be {SCHEMA_VERSION}, got {doc.get('schema')!r}")

    exp = doc.get("experiment")
    if exp is not None and exp not in CHOICES:
        fail("experiment", f"unknown experiment {exp!r}; choose from {', '.join(CHOICES)}")
    exp = experiment or exp
    if exp is None:
        raise ConfigError("no experiment given on the command line or in the config", 1, source)

    if "model" in overrides:
        try:
            name, params = parse_model_name(overrides["model"])
        except ConfigurationError as exc:
            raise ConfigError(str(exc), 0, "--model") from None
    elif "model" in doc:
        name, params = _model_spec(doc["model"], fail)
    else:
        fail(None, "config has no model")

    region, resolution = None, 3
    if "grid" in doc:
        grid = doc["grid"]
        if not isinstance(grid, dict):
            fail("grid", "grid must be an object with \"box\" and \"resolution\"")
        if "box" in grid:
            box = grid["box"]
            if (not isinstance(box, list) or not box
                    or not all(isinstance(iv, list) and len(iv) == 2 and all(map(_real, iv)) for iv in box)):
                fail("box", "grid box must be a list of [low, high] pairs")
            if any(not hi > lo for lo, hi in box):
                fail("box", "every grid interval needs high > low")
            region = tuple((float(lo), float(hi)) for lo, hi in box)
        resolution = grid.get("resolution", 3)
        if not _integer(resolution) or resolution < 2:
            fail("resolution", f"grid resolution must be an integer >= 2, got {resolution!r}")

    point = doc.get("point")
    if point is not None:
        if not isinstance(point, list) or not all(map(_real, point)):
            fail("point", "point must be a list of numbers")
        point = tuple(float(v) for v in point)

    steps = overrides.get("steps", doc.get("steps"))
    if steps is not None and (not _integer(steps) or steps < 1):
        fail("steps", f"steps must be a positive integer, got {steps!r}")

    fd_step = overrides.get("fd_step", doc.get("fd_step"))
    if fd_step is not None and (not _real(fd_step) or fd_step <= 0):
        fail("fd_step", f"fd_step must be a positive number, got {fd_step!r}")

    hs = doc.get("h_sequence")
    if hs is not None:
        if not isinstance(hs, list) or len(hs) < 3 or not all(map(_real, hs)):
            fail("h_sequence", "h_sequence must list at least three numbers")
        if any(h <= 0 for h in hs) or any(b >= a for a, b in zip(hs, hs[1:])):
            fail("h_sequence", "h_sequence must be positive and strictly decreasing")
        hs = tuple(float(h) for h in hs)

    tolerances = dict(DEFAULT_TOLERANCES)
    raw_tol = doc.get("tolerances", {})
    if not isinstance(raw_tol, dict):
        fail("tolerances", "tolerances must map names to numbers")
    for key, value in raw_tol.items():
        if key not in DEFAULT_TOLERANCES:
            fail(key, f"unknown tolerance {key!r}")
        if not _real(value) or value <= 0:
            fail(key, f"tolerance {key!r} must be positive, got {value!r}")
        tolerances[key] = float(value)

    seed = overrides.get("seed", doc.get("seed", 0))
    if not _integer(seed):
        fail("seed", f"seed must be an integer, got {seed!r}")

    output = doc.get("output", {})
    if not isinstance(output, dict):
        fail("output", "output must be an object with \"path\" and/or \"format\"")
    out = overrides.get("out", output.get("path"))
    fmt = overrides.get("format", output.get("format"))
    if fmt is None:
        fmt = "csv" if out and str(out).endswith(".csv") else "json"
    if fmt not in FORMATS:
        fail("format", f"format must be json or csv, got {fmt!r}")

    return ExperimentConfig(name, canonical_params(name, params), exp, region, resolution, point, steps, fd_step, hs,
                            tolerances, seed, out, fmt)


def model_id(name, params):
    params = canonical_params(name, params)
    if not params:
        return name
    body = ";".join(f"{k}={v if isinstance(v, str) else json.dumps(v, sort_keys=True)}"
                    for k, v in sorted(params.items()))
    return f"{name}{{{body}}}"


def _workers():
    raw = os.environ.get("GEO_THREADS")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        return 1


def make_setup(cfg, text="", source="<config>"):
    """Build the provider and sampling setup, checking the region against the model."""

    def fail(key, message):
        raise ConfigError(message, _key_line(text, key) if text else 0, source)

    try:
        provider = build_model(cfg.model, cfg.model_params)
    except (ConfigurationError, ArgumentError, TypeError, ValueError) as exc:
        fail("model", f"cannot build model {cfg.model!r}: {exc}")
    region = cfg.region or default_region(provider)
    if len(region) != provider.base_dim:
        fail("box", f"grid box has {len(region)} intervals but model {provider.name} "
                    f"has a {provider.base_dim}-dimensional base")
    if provider.gamma3 is not None:
        for corner in np.array(np.meshgrid(*region)).reshape(len(region), -1).T:
            try:
                provider.gamma3(corner)
            except DomainError as exc:
                fail("box", f"grid box leaves the model chart: {exc}")
    point = cfg.point or tuple((lo + hi) / 2 for lo, hi in region)
    if len(point) != len(region) or any(not lo <= v <= hi for v, (lo, hi) in zip(point, region)):
        fail("point", f"point {list(point)} is not inside the grid box")
    return Setup(
        provider=provider, model_id=model_id(cfg.model, cfg.model_params), region=tuple(region),
        point=tuple(point), resolution=cfg.resolution, steps_per_unit=cfg.steps, fd_step=cfg.fd_step,
        h_sequence=cfg.h_sequence, tolerances=cfg.tolerances, seed=cfg.seed, workers=_workers(),
    )


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------


def run(cfg, setup):
    """Run the configured experiment (or every applicable one for ``sweep``)."""
    report = GeometryReport(experiment=cfg.experiment, model=setup.model_id, config=cfg.as_dict())
    report.config["region"] = [list(iv) for iv in setup.region]
    report.config["point"] = list(setup.point)
    names = EXPERIMENTS if cfg.experiment == "sweep" else (cfg.experiment,)
    started = time.perf_counter()
    for name in names:
        reason = applicable(setup, name)
        if reason is not None:
            if cfg.experiment != "sweep":
                raise ConfigurationError(f"experiment {name} does not apply to {setup.model_id}: {reason}")
            report.skipped[name] = reason
            continue
        t0 = time.perf_counter()
        RUNNERS[name](setup, report)
        report.timing[name] = time.perf_counter() - t0
    report.timing["total"] = time.perf_counter() - started
    report.timestamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return report


def build_parser():
    parser = argparse.ArgumentParser(prog="geo", description="Run linear-transport experiments.")
    parser.add_argument("experiment", choices=CHOICES)
    parser.add_argument("--config", help="JSON config file (schema 1)")
    parser.add_argument("--model", help='model name, e.g. sphere or "torsion_plane{c=0.5}"')
    parser.add_argument("--out", help="report path (default: standard output)")
    parser.add_argument("--format", choices=FORMATS)
    parser.add_argument("--steps", type=int, help="RK4 steps per unit parameter length")
    parser.add_argument("--fd-step", type=float, dest="fd_step")
    parser.add_argument("--seed", type=int)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    source, text = "<config>", ""
    if args.config:
        source = args.config
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            print(f"geo: cannot read config: {exc}", file=sys.stderr)
            return 2
    overrides = {"model": args.model, "out": args.out, "format": args.format, "steps": args.steps,
                 "fd_step": args.fd_step, "seed": args.seed}
    try:
        cfg = load_config(text, source, args.experiment, overrides)
        setup = make_setup(cfg, text, source)
        report = run(cfg, setup)
    except ConfigError as exc:
        print(f"geo: {exc}", file=sys.stderr)
        return 2
    except GeometryError as exc:
        print(f"geo: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2

    rendered = report.render(cfg.fmt)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(rendered)
    else:
        sys.stdout.write(rendered)
    failed = report.failed
    print(f"geo: {cfg.experiment} on {setup.model_id}: {len(report.checks)} checks, {len(failed)} failed",
          file=sys.stderr)
    for c in failed:
        print(f"geo: FAIL {c.experiment}/{c.check} value={c.value!r} tolerance={c.tolerance!r} "
              f"inputs={json.dumps(c.as_dict()['inputs'], sort_keys=True)}", file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
