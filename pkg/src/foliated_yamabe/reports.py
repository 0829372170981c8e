"""Verification report records shared by the ``verify`` command and the test suite."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import metadata
import json
import math
import platform as platform_module
import sys
from typing import Any, Mapping, Sequence


def _package_version() -> str:
    try:
        return metadata.version("foliated-yamabe")
    except metadata.PackageNotFoundError:
        return "0.1.0"


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, Mapping):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if hasattr(value, "item") and callable(value.item):
        return _jsonable(value.item())
    return value


@dataclass(frozen=True)
class VerificationCheck:
    """One measured quantity compared against its threshold.

    Informational checks are reported but never fail a run; the embedding
    trend above the foliated exponent is the usual example.
    """

    check: str
    inputs: Mapping[str, Any]
    value: Any
    threshold: Any
    passed: bool
    informational: bool = False
    message: str = ""

    @property
    def status(self) -> str:
        if self.passed:
            return "pass"
        return "warn" if self.informational else "fail"

    def to_dict(self) -> dict[str, Any]:
        data = {
            "check": self.check,
            "inputs": _jsonable(dict(self.inputs)),
            "value": _jsonable(self.value),
            "threshold": _jsonable(self.threshold),
            "pass": bool(self.passed),
        }
        if self.informational:
            data["informational"] = True
        if self.message:
            data["message"] = self.message
        return data


def check_below(check: str, value: float, threshold: float, **inputs: Any) -> VerificationCheck:
    """Passing check when ``value <= threshold``."""

    return VerificationCheck(check, inputs, float(value), float(threshold), bool(value <= threshold))


@dataclass(frozen=True)
class VerificationReport:
    overall_status: str
    checks: list[VerificationCheck]
    package_version: str = field(default_factory=_package_version)
    python_version: str = field(default_factory=lambda: sys.version.split()[0])
    platform: str = field(default_factory=platform_module.platform)

    @classmethod
    def from_checks(cls, checks: Sequence[VerificationCheck]) -> "VerificationReport":
        return cls(_status(checks), list(checks))

    @property
    def failed(self) -> list[VerificationCheck]:
        return [check for check in self.checks if check.status == "fail"]

    def to_dict(self) -> dict[str, Any]:
        return {
            "overall_status": self.overall_status,
            "checks": [check.to_dict() for check in self.checks],
            "package_version": self.package_version,
            "python_version": self.python_version,
            "platform": self.platform,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _status(checks: Sequence[VerificationCheck]) -> str:
    if any(check.status == "fail" for check in checks):
        return "fail"
    if any(check.status == "warn" for check in checks):
        return "warn"
    return "pass"


def format_report(report: VerificationReport, *, verbose: bool = False) -> str:
    lines = [f"foliated-yamabe verify: {report.overall_status.upper()}", f"Package: {report.package_version}", ""]
    for check in report.checks:
        marker = {"pass": "PASS", "fail": "FAIL", "warn": "INFO"}[check.status]
        lines.append(f"[{marker}] {check.check}: value={check.value!r} threshold={check.threshold!r}")
        if check.message:
            lines.append(f"       {check.message}")
        if verbose and check.inputs:
            lines.append(f"       Inputs: {dict(check.inputs)}")
    return "\n".join(lines)


__all__ = ["VerificationCheck", "VerificationReport", "check_below", "format_report"]
