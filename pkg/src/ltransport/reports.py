"""Report records and their JSON / CSV serializations."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

CSV_COLUMNS = ("experiment", "check", "model", "param_point", "h", "value", "tolerance", "pass")


def _plain(x):
    """Convert numpy scalars and arrays (recursively) into JSON-ready Python values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    return x


@dataclass
class CheckRecord:
    """One pass/fail comparison.

    ``comparison`` is ``"<="`` (value at most tolerance), ``">="`` (value at
    least tolerance) or ``"within"`` (``|value - target| <= tolerance``).
    ``inputs`` names the operation and arguments that produced ``value``.
    """

    experiment: str
    check: str
    value: float
    tolerance: float
    comparison: str = "<="
    target: float | None = None
    param_point: tuple | None = None
    h: float | None = None
    inputs: dict = field(default_factory=dict)
    passed_override: bool | None = None

    @property
    def passed(self):
        if self.passed_override is not None:
            return self.passed_override
        if self.value is None or (isinstance(self.value, float) and math.isnan(self.value)):
            return False
        if self.comparison == "<=":
            return self.value <= self.tolerance
        if self.comparison == ">=":
            return self.value >= self.tolerance
        return abs(self.value - self.target) <= self.tolerance

    def as_dict(self):
        out = {
            "check": self.check,
            "value": self.value,
            "tolerance": self.tolerance,
            "comparison": self.comparison,
            "pass": self.passed,
            "param_point": list(self.param_point) if self.param_point is not None else None,
            "h": self.h,
            "inputs": self.inputs,
        }
        if self.target is not None:
            out["target"] = self.target
        return _plain(out)


def fit_record(name, fit):
    return _plain({
        "name": name,
        "slope": fit.slope,
        "intercept": fit.intercept,
        "points": [list(p) for p in fit.points],
        "at_floor": fit.at_floor,
    })


@dataclass
class GeometryReport:
    """Outcome of one experiment run (or a sweep of several)."""

    experiment: str
    model: str
    checks: list = field(default_factory=list)
    fits: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    timestamp: str = ""

    @property
    def failed(self):
        return [c for c in self.checks if not c.passed]

    @property
    def passed(self):
        return not self.failed

    def body(self):
        return _plain({
            "experiment": self.experiment,
            "model": self.model,
            "config": self.config,
            "checks": [dict(c.as_dict(), experiment=c.experiment) for c in self.checks],
            "fits": self.fits,
            "verdicts": self.verdicts,
            "skipped": self.skipped,
            "summary": {"checks": len(self.checks), "failed": len(self.failed)},
        })

    def to_json(self):
        doc = {
            "header": {"timestamp": self.timestamp, "timing": _plain(self.timing)},
            "body": self.body(),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for c in self.checks:
            point = "" if c.param_point is None else ";".join(repr(float(v)) for v in c.param_point)
            writer.writerow([
                c.experiment, c.check, self.model, point,
                "" if c.h is None else repr(float(c.h)),
                repr(float(c.value)) if c.value is not None else "",
                repr(float(c.tolerance)),
                "true" if c.passed else "false",
            ])
        return buf.getvalue()

    def render(self, fmt):
        return self.to_csv() if fmt == "csv" else self.to_json()
