"""JSON, CSV and column-data artifacts of solver runs."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
import json
import logging
from pathlib import Path
from typing import IO, Any, Iterable, Mapping, Sequence

import numpy as np

from .discrete import ProblemSpec, build_problem
from .flow import SolutionRecord
from .quotient import WeightedDomain, domain_from_dict, domain_to_dict

LOGGER = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
SUMMARY_COLUMNS = (
    "rank",
    "energy",
    "sign_class",
    "nodal_count",
    "grad_norm",
    "nehari_residual",
    "strong_residual",
    "iters",
    "converged",
    "seed",
)


@dataclass(frozen=True, eq=False)
class SolutionSet:
    domain: WeightedDomain
    problem: Mapping[str, Any]
    records: list[SolutionRecord]
    seed: int = 0
    meta: Mapping[str, Any] = field(default_factory=dict)

    def build_problem(self) -> ProblemSpec:
        return problem_from_dict(self.domain, self.problem)


def _write_text(text: str, target: str | Path | IO[str]) -> None:
    if hasattr(target, "write"):
        target.write(text)  # type: ignore[union-attr]
        return
    Path(target).write_text(text, encoding="utf-8")


def _read_text(source: str | Path | IO[str]) -> str:
    if hasattr(source, "read"):
        return source.read()  # type: ignore[union-attr]
    return Path(source).read_text(encoding="utf-8")


def write_json_document(data: Mapping[str, Any], target: str | Path | IO[str]) -> None:
    _write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", target)


def _coefficient_to_json(values: np.ndarray, constant: bool) -> float | list[float]:
    return float(values[0]) if constant else values.tolist()


def problem_to_dict(spec: ProblemSpec) -> dict[str, Any]:
    return {
        "p": spec.p,
        "b": _coefficient_to_json(spec.b, spec.b_is_constant),
        "c": _coefficient_to_json(spec.c, spec.c_is_constant),
        "theta": spec.theta,
        "mu": spec.mu,
    }


def problem_from_dict(domain: WeightedDomain, data: Mapping[str, Any]) -> ProblemSpec:
    missing = {"p", "b", "c", "theta"} - set(data)
    if missing:
        raise ValueError(f"Problem document missing required fields: {', '.join(sorted(missing))}")

    def coefficient(value: Any) -> Any:
        return np.asarray(value, dtype=float) if isinstance(value, list) else value

    return build_problem(domain, float(data["p"]), b=coefficient(data["b"]), c=coefficient(data["c"]), theta=float(data["theta"]))


def solutions_to_dict(
    domain: WeightedDomain,
    spec: ProblemSpec,
    records: Sequence[SolutionRecord],
    *,
    seed: int = 0,
    meta: Mapping[str, Any] | None = None,
) -> dict[str, Any]:
    for record in records:
        if record.domain is not domain:
            raise ValueError(f"record {record.seed!r} does not live on {domain.name!r}")
    positive = [record.energy for record in records if record.nodal_count == 0]
    return {
        "schema_version": SCHEMA_VERSION,
        "domain": domain_to_dict(domain),
        "problem": problem_to_dict(spec),
        "seed": seed,
        "least_energy": min(positive) if positive else None,
        "records": [record.to_dict() for record in records],
        "meta": dict(meta or {}),
    }


def write_solutions(
    domain: WeightedDomain,
    spec: ProblemSpec,
    records: Sequence[SolutionRecord],
    target: str | Path | IO[str],
    *,
    seed: int = 0,
    meta: Mapping[str, Any] | None = None,
) -> None:
    write_json_document(solutions_to_dict(domain, spec, records, seed=seed, meta=meta), target)
    LOGGER.info("Wrote %d solution record(s)", len(records))


def read_solutions(source: str | Path | IO[str]) -> SolutionSet:
    try:
        data = json.loads(_read_text(source))
    except json.JSONDecodeError as exc:
        raise ValueError(f"Invalid solutions JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValueError("Solutions document must be a JSON object")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"Unsupported solutions schema_version: {data.get('schema_version')!r}")
    missing = {"domain", "problem", "records"} - set(data)
    if missing:
        raise ValueError(f"Solutions document missing required fields: {', '.join(sorted(missing))}")
    domain = domain_from_dict(data["domain"])
    records = [SolutionRecord.from_dict(item, domain) for item in data["records"]]
    return SolutionSet(
        domain=domain,
        problem=dict(data["problem"]),
        records=records,
        seed=int(data.get("seed", 0)),
        meta=dict(data.get("meta") or {}),
    )


def write_summary_csv(records: Iterable[SolutionRecord], target: str | Path | IO[str]) -> None:
    """One row per record, sorted by energy."""

    owns_file = not hasattr(target, "write")
    fh: IO[str] = open(Path(target), "w", encoding="utf-8", newline="") if owns_file else target  # type: ignore[assignment]
    try:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for rank, record in enumerate(sorted(records, key=lambda item: item.energy)):
            writer.writerow(
                {
                    "rank": rank,
                    "energy": repr(record.energy),
                    "sign_class": record.sign_class.value,
                    "nodal_count": record.nodal_count,
                    "grad_norm": f"{record.grad_norm:.6e}",
                    "nehari_residual": f"{record.nehari_residual:.6e}",
                    "strong_residual": f"{record.strong_residual:.6e}",
                    "iters": record.iters,
                    "converged": record.converged,
                    "seed": record.seed,
                }
            )
    finally:
        if owns_file:
            fh.close()


def write_plot_data(record: SolutionRecord, target: str | Path | IO[str]) -> None:
    """Whitespace separated columns t, u(t), w(t)."""

    domain = record.domain
    table = np.column_stack([domain.nodes, record.field.values, domain.weights])
    header = f"{domain.name} energy={record.energy!r} nodal_count={record.nodal_count}\nt u w"
    np.savetxt(target, table, fmt="%.17g", header=header)


__all__ = [
    "SCHEMA_VERSION",
    "SUMMARY_COLUMNS",
    "SolutionSet",
    "problem_from_dict",
    "problem_to_dict",
    "read_solutions",
    "solutions_to_dict",
    "write_json_document",
    "write_plot_data",
    "write_solutions",
    "write_summary_csv",
]
