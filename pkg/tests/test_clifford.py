import math

import numpy as np
import pytest

from foliated_yamabe.clifford import (
    CliffordSystem,
    DegenerateFoliationError,
    NonUnitVectorError,
    UnsupportedCliffordError,
    build_clifford_system,
    fkm_gradient_ratio,
    fkm_multiplicities_for,
    fkm_quotient_domain,
    fkm_value,
    minimal_dimension,
    pi_rho,
)
from foliated_yamabe.presets import EndpointKind, get_preset
from foliated_yamabe.quotient import integrate, uniform_sphere_sampler


def _unit_samples(n: int, count: int, seed: int = 0) -> np.ndarray:
    return uniform_sphere_sampler(n)(np.random.default_rng(seed), count)


def test_rank_one_system_is_the_pauli_pair() -> None:
    system = build_clifford_system(1)
    assert system.n == 2
    assert np.array_equal(system.matrices[0], [[1, 0], [0, -1]])
    assert np.array_equal(system.matrices[1], [[0, 1], [1, 0]])


@pytest.mark.parametrize("q", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("copies", [1, 2])
def test_clifford_relations_hold_exactly(q: int, copies: int) -> None:
    system = build_clifford_system(q, copies)
    assert len(system.matrices) == q + 1
    assert system.n == copies * minimal_dimension(q)
    assert system.check_relations() == []
    gram = np.einsum("aij,bij->ab", system.stacked, system.stacked)
    assert np.array_equal(gram, system.n * np.eye(q + 1, dtype=np.int64))


def test_unsupported_rank() -> None:
    with pytest.raises(UnsupportedCliffordError):
        build_clifford_system(6)
    with pytest.raises(ValueError, match="copies"):
        build_clifford_system(2, 0)


def test_pi_rho_on_the_circle_doubles_the_angle() -> None:
    system = build_clifford_system(1)
    for phi in np.linspace(0.0, 2 * math.pi, 13):
        image = pi_rho(system, np.array([math.cos(phi), math.sin(phi)]))
        assert image == pytest.approx([math.cos(2 * phi), math.sin(2 * phi)], abs=1e-12)


@pytest.mark.parametrize("q", [1, 2, 3, 4])
def test_pi_rho_of_first_basis_vector(q: int) -> None:
    system = build_clifford_system(q, 2)
    e0 = np.zeros(system.n)
    e0[0] = 1.0
    expected = np.zeros(q + 1)
    expected[0] = 1.0
    assert np.array_equal(pi_rho(system, e0), expected)


def test_pi_rho_rejects_vectors_off_the_sphere() -> None:
    system = build_clifford_system(1)
    with pytest.raises(NonUnitVectorError):
        pi_rho(system, np.array([1.0, 1.0]))
    with pytest.raises(NonUnitVectorError):
        fkm_value(system, np.array([[0.5, 0.0]]))


@pytest.mark.parametrize("q, copies", [(2, 1), (3, 1), (4, 2)])
def test_moment_map_and_fkm_function_are_bounded_and_even(q: int, copies: int) -> None:
    system = build_clifford_system(q, copies)
    points = _unit_samples(system.n, 2_000, seed=q)
    images = pi_rho(system, points)
    assert np.all(np.linalg.norm(images, axis=1) <= 1.0 + 1e-12)
    assert np.allclose(pi_rho(system, -points), images, atol=1e-14)
    values = fkm_value(system, points)
    assert np.all((values >= -1.0 - 1e-12) & (values <= 1.0 + 1e-12))


@pytest.mark.slow
@pytest.mark.parametrize("q", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("copies", [1, 2])
def test_moment_map_bounds_on_many_unit_vectors(q: int, copies: int) -> None:
    system = build_clifford_system(q, copies)
    points = _unit_samples(system.n, 100_000, seed=10 * q + copies)
    assert np.all(np.linalg.norm(pi_rho(system, points), axis=1) <= 1.0 + 1e-12)
    values = fkm_value(system, points)
    assert np.all((values >= -1.0 - 1e-12) & (values <= 1.0 + 1e-12))


def test_rank_one_single_copy_is_degenerate() -> None:
    system = build_clifford_system(1, 1)
    points = _unit_samples(2, 100)
    assert np.allclose(fkm_value(system, points), -1.0, atol=1e-12)
    assert fkm_multiplicities_for(1, 1) == (1, -1)
    with pytest.raises(DegenerateFoliationError):
        fkm_quotient_domain(system, 10, 10_000)


def test_gradient_ratio_is_constant_for_isoparametric_functions() -> None:
    system = build_clifford_system(1, 2)
    ratios = fkm_gradient_ratio(system, _unit_samples(system.n, 1_000))
    usable = ratios[np.isfinite(ratios)]
    assert usable.size > 900
    assert np.allclose(usable, 16.0, rtol=1e-6)


def test_quotient_of_two_rank_one_copies_matches_the_analytic_weight() -> None:
    system = build_clifford_system(1, 2)
    domain = fkm_quotient_domain(system, 40, 100_000, seed=5)
    preset = get_preset("fkm(q=1,copies=2)")
    assert domain.meta["g"] == pytest.approx(4.0, rel=1e-8)
    assert domain.meta["multiplicities"] == [1, 0]
    assert domain.length == pytest.approx(math.pi / 4, rel=1e-12)
    assert integrate(domain, 1.0) == pytest.approx(2 * math.pi**2, rel=1e-12)
    assert domain.start_kind is EndpointKind.SINGULAR_LEAF
    assert domain.end_kind is EndpointKind.REGULAR
    outliers = np.abs(domain.weights - preset.weight(domain.nodes)) > 3.0 * domain.stderr
    assert int(np.count_nonzero(outliers)) <= 2


def test_system_document_round_trip() -> None:
    system = build_clifford_system(3)
    restored = CliffordSystem.from_dict(system.to_dict())
    assert restored.q == 3 and restored.n == system.n
    assert all(np.array_equal(left, right) for left, right in zip(restored.matrices, system.matrices))
    broken = system.to_dict()
    broken["matrices"][1] = broken["matrices"][0]
    with pytest.raises(ValueError, match="relations violated"):
        CliffordSystem.from_dict(broken)
