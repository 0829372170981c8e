import csv
import json

import numpy as np
import pytest

from foliated_yamabe.artifacts import (
    SCHEMA_VERSION,
    SUMMARY_COLUMNS,
    problem_from_dict,
    problem_to_dict,
    read_solutions,
    write_plot_data,
    write_solutions,
    write_summary_csv,
)
from foliated_yamabe.discrete import Field, build_problem
from foliated_yamabe.energy import constant_solution
from foliated_yamabe.flow import SignClass, make_record
from foliated_yamabe.quotient import make_preset


@pytest.fixture
def solved():
    domain = make_preset("okon-sphere(2,2)", 32)
    spec = build_problem(domain, 4.0, b=2.0)
    constant = make_record(spec, domain, constant_solution(spec, domain), grad_norm=0.0, seed="constant", iters=0, converged=True)
    changing = make_record(
        spec, domain, Field.from_function(domain, lambda t: 3.0 * np.cos(2 * t)), grad_norm=0.5, seed="pattern:+-", iters=7, converged=False
    )
    return domain, spec, [changing, constant]


def test_solutions_round_trip(tmp_path, solved) -> None:
    domain, spec, records = solved
    target = tmp_path / "solutions.json"
    write_solutions(domain, spec, records, target, seed=4, meta={"note": "test"})
    restored = read_solutions(target)
    assert np.array_equal(restored.domain.nodes, domain.nodes)
    assert restored.seed == 4 and restored.meta == {"note": "test"}
    assert [record.seed for record in restored.records] == ["pattern:+-", "constant"]
    assert restored.records[0].sign_class is SignClass.SIGN_CHANGING
    assert restored.records[0].field.domain is restored.domain
    rebuilt = restored.build_problem()
    assert rebuilt.p == spec.p and rebuilt.theta == spec.theta
    assert rebuilt.mu == pytest.approx(spec.mu, abs=1e-12)
    document = json.loads(target.read_text(encoding="utf-8"))
    assert document["schema_version"] == SCHEMA_VERSION
    assert document["least_energy"] == records[1].energy


def test_repeated_writes_are_byte_identical(tmp_path, solved) -> None:
    domain, spec, records = solved
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    write_solutions(domain, spec, records, first)
    write_solutions(domain, spec, records, second)
    assert first.read_bytes() == second.read_bytes()


def test_records_must_live_on_the_written_domain(tmp_path, solved) -> None:
    domain, spec, records = solved
    other = make_preset("okon-sphere(2,2)", 32)
    with pytest.raises(ValueError, match="does not live"):
        write_solutions(other, spec, records, tmp_path / "solutions.json")


def test_summary_is_sorted_by_energy(tmp_path, solved) -> None:
    _, _, records = solved
    target = tmp_path / "summary.csv"
    write_summary_csv(records, target)
    with target.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == SUMMARY_COLUMNS
    energies = [float(row["energy"]) for row in rows]
    assert energies == sorted(energies)
    assert [row["rank"] for row in rows] == ["0", "1"]
    assert {row["sign_class"] for row in rows} == {"positive", "sign-changing"}


def test_plot_data_columns(tmp_path, solved) -> None:
    domain, _, records = solved
    target = tmp_path / "solution_00.dat"
    write_plot_data(records[1], target)
    lines = target.read_text(encoding="utf-8").splitlines()
    assert lines[1] == "# t u w"
    table = np.loadtxt(target)
    assert table.shape == (domain.size, 3)
    assert np.array_equal(table[:, 0], domain.nodes)
    assert np.array_equal(table[:, 1], records[1].field.values)
    assert np.array_equal(table[:, 2], domain.weights)


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda data: data.update(schema_version="0"), "schema_version"),
        (lambda data: data.pop("records"), "missing required fields: records"),
    ],
)
def test_solution_document_validation(tmp_path, solved, mutate, message) -> None:
    domain, spec, records = solved
    target = tmp_path / "solutions.json"
    write_solutions(domain, spec, records, target)
    data = json.loads(target.read_text(encoding="utf-8"))
    mutate(data)
    target.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(ValueError, match=message):
        read_solutions(target)


def test_invalid_json_is_rejected(tmp_path) -> None:
    target = tmp_path / "solutions.json"
    target.write_text("{", encoding="utf-8")
    with pytest.raises(ValueError, match="Invalid solutions JSON"):
        read_solutions(target)


def test_problem_round_trip_with_profile() -> None:
    domain = make_preset("torus-factor", 32)
    spec = build_problem(domain, 3.0, b=lambda t: 1.0 + 0.25 * np.sin(t), c=2.0)
    data = problem_to_dict(spec)
    assert isinstance(data["b"], list) and data["c"] == 2.0
    restored = problem_from_dict(domain, json.loads(json.dumps(data)))
    assert np.array_equal(restored.b, spec.b)
    assert restored.theta == spec.theta
    with pytest.raises(ValueError, match="theta"):
        problem_from_dict(domain, {"p": 3.0, "b": 1.0, "c": 1.0})
