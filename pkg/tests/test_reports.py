import csv
import io

import pytest

from spectralstab.errors import InvalidInputError, NumericalError
from spectralstab.reports import PLOT_FIELDS, ReportRow, StabilityReport, plot_rows, point_rows


def _report():
    rep = StabilityReport("demo", {"level": 3})
    rep.add("a=1:lower", 2.0, 1.0)
    rep.add("a=1:upper", 1.0, 1.05, tolerance=0.1)
    rep.add("a=2:lower", 0.5, 1.0)
    rep.add("a=3:info", 0.0, 5.0, informational=True)
    return rep


@pytest.mark.parametrize("lhs,rhs,tol,ok", [(1.0, 1.0, 0.0, True), (0.9, 1.0, 0.1, True),
                                            (0.9, 1.0, 0.05, False), (2.0, -1.0, 0.0, True)])
def test_row_verdict(lhs, rhs, tol, ok):
    assert ReportRow("p", lhs, rhs, tol).passed is ok


def test_row_rejects_nonfinite_and_negative_tolerance():
    with pytest.raises(NumericalError):
        ReportRow("p", float("nan"), 1.0)
    with pytest.raises(InvalidInputError):
        ReportRow("p", 1.0, 1.0, -1.0)


def test_report_status():
    rep = _report()
    assert not rep.passed and rep.status == "fail"
    assert [r.param for r in rep.failures()] == ["a=2:lower"]
    assert rep.summary_line() == "demo: FAIL 2/3 checks"
    rep.inconclusive = True
    assert rep.status == "inconclusive"


def test_json_roundtrip_is_stable():
    rep = _report()
    text = rep.to_json()
    back = StabilityReport.from_json(text)
    assert back.to_json() == text
    assert [r.informational for r in back.rows] == [False, False, False, True]


def test_csv_rows():
    rows = list(csv.DictReader(io.StringIO(_report().to_csv())))
    assert len(rows) == 4
    assert rows[1]["pass"] == "true" and rows[2]["pass"] == "false"
    assert rows[3]["status"] == "informational"


def test_point_aggregation():
    pts = point_rows(_report())
    assert [p for p, _, _ in pts] == ["a=1", "a=2", "a=3"]
    # binding row at a=1 is the one with smallest margin + tolerance
    assert pts[0][1].param == "a=1:upper" and pts[0][2]
    assert not pts[1][2]
    text = plot_rows(_report())
    assert text.splitlines()[0] == ",".join(PLOT_FIELDS)
    assert len(text.splitlines()) == 4


@pytest.mark.parametrize("text", ["[]", "{", '{"rows": []}', '{"experiment": "x", "rows": [{"lhs": 1}]}'])
def test_malformed_reports(text):
    with pytest.raises(InvalidInputError):
        StabilityReport.from_json(text)


def test_floats_rounded_to_twelve_digits():
    rep = StabilityReport("r")
    rep.add("p", 1 / 3, 0.0)
    assert '"lhs": 0.333333333333' in rep.to_json()
