"""Structured audit reports: one-sided inequality rows plus provenance.

Every row states ``LHS >= RHS``; it passes iff ``margin = LHS - RHS`` is at
least ``-tolerance``.  Rows flagged informational are printed but do not
decide the verdict.  Serialization rounds floats to 12 significant digits
and carries no timestamps, so reruns are byte-identical.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

from .errors import InvalidInputError, NumericalError

SIG = 12
PASS, FAIL, INFO, INCONCLUSIVE = "pass", "fail", "informational", "inconclusive"
CSV_FIELDS = ["experiment", "param", "lhs", "rhs", "margin", "tolerance", "pass", "status", "note"]
PLOT_FIELDS = ["param", "lhs", "rhs", "margin", "pass"]


def fmt(x) -> str:
    """Float as text with 12 significant digits."""
    return f"{float(x):.{SIG}g}"


def _round(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return str(obj)
        return float(fmt(obj))
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    try:  # numpy scalars and arrays
        import numpy as np
        if isinstance(obj, np.ndarray):
            return _round(obj.tolist())
        if isinstance(obj, np.generic):
            return _round(obj.item())
    except ImportError:  # pragma: no cover
        pass
    return str(obj)


@dataclass
class ReportRow:
    param: str
    lhs: float
    rhs: float
    tolerance: float = 0.0
    informational: bool = False
    note: str = ""

    def __post_init__(self):
        for name in ("lhs", "rhs", "tolerance"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise NumericalError(f"non-finite {name} in report row {self.param!r}")
            setattr(self, name, v)
        if self.tolerance < 0:
            raise InvalidInputError("tolerances are one-sided and nonnegative")

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs

    @property
    def point(self) -> str:
        """Parameter point of the row: the part of ``param`` before the first colon."""
        return self.param.split(":", 1)[0]

    @property
    def passed(self) -> bool:
        return self.margin >= -self.tolerance

    @property
    def status(self) -> str:
        if self.informational:
            return INFO
        return PASS if self.passed else FAIL

    def to_dict(self) -> dict:
        return {"param": self.param, "lhs": self.lhs, "rhs": self.rhs, "margin": self.margin,
                "tolerance": self.tolerance, "pass": self.passed, "status": self.status, "note": self.note}


@dataclass
class StabilityReport:
    """Both sides of an audited inequality over a parameter sweep."""

    experiment: str
    parameters: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    inconclusive: bool = False
    reason: str = ""

    def add(self, param, lhs, rhs, tolerance=0.0, informational=False, note="") -> ReportRow:
        row = ReportRow(str(param), lhs, rhs, tolerance, informational, note)
        self.rows.append(row)
        return row

    def check(self, param, ok: bool, note="", informational=False) -> ReportRow:
        """Boolean check encoded as the row ``1 >= 1`` or ``0 >= 1``."""
        return self.add(param, 1.0 if ok else 0.0, 1.0, 0.0, informational, note)

    @property
    def asserted(self) -> list:
        return [r for r in self.rows if not r.informational]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.asserted)

    @property
    def status(self) -> str:
        if self.inconclusive:
            return INCONCLUSIVE
        return PASS if self.passed else FAIL

    def failures(self) -> list:
        return [r for r in self.asserted if not r.passed]

    def summary_line(self) -> str:
        n = len(self.asserted)
        bad = len(self.failures())
        extra = f" ({self.reason})" if self.reason else ""
        return f"{self.experiment}: {self.status.upper()} {n - bad}/{n} checks{extra}"

    def to_dict(self) -> dict:
        return _round({"experiment": self.experiment, "status": self.status, "passed": self.passed,
                       "inconclusive": self.inconclusive, "reason": self.reason,
                       "parameters": self.parameters, "summary": self.summary,
                       "provenance": self.provenance, "rows": [r.to_dict() for r in self.rows]})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in self.rows:
            w.writerow([self.experiment, r.param, fmt(r.lhs), fmt(r.rhs), fmt(r.margin), fmt(r.tolerance),
                        str(r.passed).lower(), r.status, r.note])
        return buf.getvalue()

    @classmethod
    def from_dict(cls, d: dict) -> "StabilityReport":
        try:
            rep = cls(d["experiment"], d.get("parameters", {}), [], d.get("summary", {}),
                      d.get("provenance", {}), bool(d.get("inconclusive", False)), d.get("reason", ""))
            for r in d["rows"]:
                rep.rows.append(ReportRow(r["param"], r["lhs"], r["rhs"], r.get("tolerance", 0.0),
                                          r.get("status") == INFO, r.get("note", "")))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed report: {exc}") from None
        return rep

    @classmethod
    def from_json(cls, text: str) -> "StabilityReport":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"malformed report: {exc}") from None
        if not isinstance(d, dict):
            raise InvalidInputError("malformed report: top level must be an object")
        return cls.from_dict(d)


def point_rows(report: StabilityReport) -> list:
    """One ``(point, row, passed)`` per parameter point, in first-appearance order.

    The representative row is the binding asserted check (smallest
    ``margin + tolerance``), or the first row when the point is purely
    informational; ``passed`` is true iff every asserted row at the point passes.
    """
    groups: dict = {}
    for r in report.rows:
        groups.setdefault(r.point, []).append(r)
    out = []
    for pt, rows in groups.items():
        asserted = [r for r in rows if not r.informational]
        rep = min(asserted, key=lambda r: r.margin + r.tolerance) if asserted else rows[0]
        out.append((pt, rep, all(r.passed for r in asserted)))
    return out


def plot_rows(report: StabilityReport) -> str:
    """Tidy CSV with header ``param,lhs,rhs,margin,pass``, one row per parameter point."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLOT_FIELDS)
    for pt, r, ok in point_rows(report):
        w.writerow([pt, fmt(r.lhs), fmt(r.rhs), fmt(r.margin), str(ok).lower()])
    return buf.getvalue()
