import logging
import math

import numpy as np
import pytest

from foliated_yamabe.discrete import (
    CoercivityError,
    Field,
    ProblemSpecError,
    build_problem,
    dirichlet_form,
    estimate_mu,
    first_invariant_eigenvalue,
    helmholtz_solve,
    inner_h1,
    inner_theta,
    norm_cp,
    smooth_random_field,
    stiffness_matrix,
)
from foliated_yamabe.quotient import DomainMismatchError, make_preset


@pytest.fixture(scope="module")
def sphere():
    return make_preset("suspension-sphere(2)", 128)


@pytest.fixture(scope="module")
def torus():
    return make_preset("torus-factor", 128)


@pytest.fixture(scope="module")
def okon():
    return make_preset("okon-sphere(2,2)", 128)


def test_field_validates_its_values(torus) -> None:
    with pytest.raises(DomainMismatchError):
        Field(torus, np.ones(3))
    with pytest.raises(ValueError, match="finite"):
        Field(torus, np.full(torus.size, np.nan))
    field = Field.constant(torus, 2.0)
    assert not field.values.flags.writeable
    assert np.array_equal((field + 1.0).values, np.full(torus.size, 3.0))
    assert np.array_equal((3 * field).values, np.full(torus.size, 6.0))
    assert (field - field).values.max() == 0.0


@pytest.mark.parametrize("name", ["sphere", "torus", "okon"])
def test_stiffness_annihilates_constants(name, request) -> None:
    domain = request.getfixturevalue(name)
    matrix = stiffness_matrix(domain)
    assert np.allclose(matrix @ np.ones(domain.size), 0.0, atol=1e-10)
    assert abs(matrix - matrix.T).max() == 0.0


def test_dirichlet_form_of_cosine_on_the_sphere(sphere) -> None:
    u = Field.from_function(sphere, np.cos)
    # the integral of |u'|^2 = 2 pi sin^3 t over [0, pi]
    assert dirichlet_form(sphere, u, u) == pytest.approx(8 * math.pi / 3, rel=1e-3)
    assert inner_h1(sphere, u, u) == pytest.approx(8 * math.pi / 3 + 4 * math.pi / 3, rel=1e-3)


def test_helmholtz_of_a_constant_is_a_constant(sphere) -> None:
    spec = build_problem(sphere, 4.0, b=2.0)
    solution = helmholtz_solve(spec, sphere, 2.0)
    assert np.allclose(solution.values, 2.0 / spec.theta, rtol=1e-12)


@pytest.mark.parametrize("name", ["sphere", "torus"])
def test_helmholtz_solve_is_the_riesz_map(name, request) -> None:
    domain = request.getfixturevalue(name)
    spec = build_problem(domain, 4.0)
    rng = np.random.default_rng(11)
    f = rng.standard_normal(domain.size)
    v = helmholtz_solve(spec, domain, f)
    for _ in range(5):
        phi = rng.standard_normal(domain.size)
        expected = float(np.dot(domain.quadrature_weights * f, phi))
        assert inner_theta(spec, domain, v, phi) == pytest.approx(expected, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("name", ["sphere", "torus", "okon"])
def test_mu_equals_constant_below_one(name, request) -> None:
    domain = request.getfixturevalue(name)
    spec = build_problem(domain, 4.0, b=0.5)
    assert spec.mu == pytest.approx(0.5, abs=1e-8)
    assert estimate_mu(spec, domain) == spec.mu


def test_mu_saturates_at_one_when_end_nodes_carry_no_mass(sphere) -> None:
    spec = build_problem(sphere, 4.0, b=2.0)
    assert spec.mu == pytest.approx(1.0, abs=1e-6)
    assert spec.theta == pytest.approx(3.0)


def test_default_theta_dominates_mu_and_b(torus) -> None:
    spec = build_problem(torus, 4.0, b=lambda t: 1.0 + 0.5 * np.cos(t))
    assert spec.theta >= float(np.max(spec.b))
    assert spec.theta > max(1.0, spec.mu)
    assert 0.5 <= spec.mu <= 1.0 + 1e-9
    assert not spec.b_is_constant
    assert spec.describe()["b"] == "profile"


def test_build_problem_rejects_subquadratic_exponents(torus) -> None:
    with pytest.raises(ProblemSpecError, match="p > 2"):
        build_problem(torus, 2.0)


def test_build_problem_rejects_supercritical_exponents(okon) -> None:
    with pytest.raises(ProblemSpecError, match="p <="):
        build_problem(okon, 7.0)


def test_build_problem_rejects_nonpositive_c(torus) -> None:
    with pytest.raises(ProblemSpecError, match="c must be positive"):
        build_problem(torus, 4.0, c=0.0)


def test_build_problem_rejects_noncoercive_b(torus) -> None:
    with pytest.raises(CoercivityError):
        build_problem(torus, 4.0, b=-5.0)


def test_build_problem_rejects_small_theta(torus) -> None:
    with pytest.raises(ProblemSpecError, match="theta"):
        build_problem(torus, 4.0, theta=0.5)
    with pytest.raises(ProblemSpecError, match="theta"):
        build_problem(torus, 4.0, b=3.0, theta=2.0)


def test_yamabe_exponent_and_conformal_coefficient(okon, caplog) -> None:
    with caplog.at_level(logging.WARNING):
        spec = build_problem(okon, "yamabe", b="yamabe")
    assert spec.p == pytest.approx(6.0)
    assert np.allclose(spec.b, 0.75)
    assert "critical" in caplog.text


def test_yamabe_exponent_needs_dimension_three(torus) -> None:
    with pytest.raises(ProblemSpecError, match="yamabe"):
        build_problem(torus, "yamabe")


def test_coefficient_shape_is_checked(torus) -> None:
    with pytest.raises(ProblemSpecError, match="shape"):
        build_problem(torus, 4.0, b=np.ones(3))
    with pytest.raises(ProblemSpecError, match="unknown profile"):
        build_problem(torus, 4.0, b="ricci")


@pytest.mark.parametrize(
    "name, expected", [("torus", 1.0), ("sphere", 2.0), ("okon", 8.0)]
)
def test_first_invariant_eigenvalue(name, expected, request) -> None:
    domain = request.getfixturevalue(name)
    assert first_invariant_eigenvalue(domain) == pytest.approx(expected, rel=1e-2)


def test_norm_cp_of_constant(torus) -> None:
    spec = build_problem(torus, 4.0, c=2.0)
    # (2 * 4 pi^2 * 1)^(1/4)
    assert norm_cp(spec, torus, 1.0) == pytest.approx((8 * math.pi**2) ** 0.25, rel=1e-12)


def test_smooth_random_field_depends_only_on_the_seed(sphere) -> None:
    first = smooth_random_field(sphere, np.random.default_rng(4))
    second = smooth_random_field(sphere, np.random.default_rng(4))
    assert np.array_equal(first.values, second.values)
    assert np.ptp(first.values) > 0.0
