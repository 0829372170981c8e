import json
import math

import numpy as np

from foliated_yamabe.reports import VerificationCheck, VerificationReport, check_below, format_report


def test_check_dict_uses_the_report_keys() -> None:
    check = check_below("nehari", 1e-12, 1e-8, seed="constant")
    assert check.to_dict() == {
        "check": "nehari",
        "inputs": {"seed": "constant"},
        "value": 1e-12,
        "threshold": 1e-8,
        "pass": True,
    }


def test_check_status() -> None:
    assert check_below("projection", 0.5, 1e-6).status == "fail"
    informational = VerificationCheck("embedding", {}, 0.3, 0.05, False, informational=True, message="trend=unbounded-trend")
    assert informational.status == "warn"
    data = informational.to_dict()
    assert data["informational"] is True
    assert data["message"] == "trend=unbounded-trend"


def test_overall_status_prefers_failures_over_warnings() -> None:
    passing = check_below("a", 0.0, 1.0)
    warning = VerificationCheck("b", {}, 2.0, 1.0, False, informational=True)
    failing = check_below("c", 2.0, 1.0)
    assert VerificationReport.from_checks([passing]).overall_status == "pass"
    assert VerificationReport.from_checks([passing, warning]).overall_status == "warn"
    report = VerificationReport.from_checks([passing, warning, failing])
    assert report.overall_status == "fail"
    assert [check.check for check in report.failed] == ["c"]


def test_non_finite_and_numpy_values_serialise() -> None:
    check = VerificationCheck("refinement", {"grids": (32, 64), "coarse": np.float64(2.5)}, math.inf, np.float64(3.5), True)
    report = VerificationReport.from_checks([check])
    data = json.loads(report.to_json())
    assert data["checks"][0]["value"] == "inf"
    assert data["checks"][0]["threshold"] == 3.5
    assert data["checks"][0]["inputs"] == {"grids": [32, 64], "coarse": 2.5}
    assert {"package_version", "python_version", "platform"} <= set(data)


def test_format_report_marks_every_check() -> None:
    report = VerificationReport.from_checks(
        [
            check_below("nehari", 0.0, 1e-8),
            check_below("projection", 1.0, 1e-6),
            VerificationCheck("embedding", {"p": 6.0}, 0.3, 0.05, False, informational=True, message="trend=unbounded-trend"),
        ]
    )
    text = format_report(report, verbose=True)
    assert text.splitlines()[0] == "foliated-yamabe verify: FAIL"
    assert "[PASS] nehari" in text
    assert "[FAIL] projection" in text
    assert "[INFO] embedding" in text
    assert "trend=unbounded-trend" in text
    assert "Inputs: {'p': 6.0}" in text
