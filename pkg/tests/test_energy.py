import math

import numpy as np
import pytest

from foliated_yamabe.discrete import (
    Field,
    build_problem,
    first_invariant_eigenvalue,
    inner_theta,
    norm_theta,
    quadratic_b,
    smooth_random_field,
)
from foliated_yamabe.energy import (
    ProjectionError,
    apply_G,
    apply_L,
    constant_solution,
    derivative,
    energy,
    gradient_theta,
    l_operator_bound,
    nehari_residual,
    nodal_components,
    project_nehari,
    project_nodal_nehari,
    sign_changes,
    vetois_constant,
)
from foliated_yamabe.quotient import integrate, make_preset

PRESETS = ["suspension-sphere(2)", "okon-sphere(2,2)", "torus-factor"]
STEPS = (1e-2, 1e-3, 1e-4, 1e-5)


@pytest.fixture(scope="module", params=PRESETS)
def problem(request):
    domain = make_preset(request.param, 128)
    return build_problem(domain, 4.0, b=2.0, c=1.0), domain


def _random_fields(domain, count, seed=0):
    rng = np.random.default_rng(seed)
    return [smooth_random_field(domain, rng) for _ in range(count)]


def _power_term(spec, domain, values, exponent):
    return float(np.dot(domain.quadrature_weights * spec.c, np.abs(values) ** exponent))


def _centred_roundoff(spec, domain, u, v, step):
    """Floating-point allowance for (J(u + hv) - J(u - hv)) / 2h - J'(u)v."""

    eps = np.finfo(float).eps

    def size(w):
        return 0.5 * quadratic_b(spec, domain, w, w) + _power_term(spec, domain, w.values, spec.p) / spec.p

    slope = math.sqrt(quadratic_b(spec, domain, u, u) * quadratic_b(spec, domain, v, v))
    slope += float(np.dot(domain.quadrature_weights * spec.c, np.abs(u.values) ** (spec.p - 1) * np.abs(v.values)))
    return domain.size * eps * ((size(u + step * v) + size(u - step * v)) / (2 * step) + slope)


@pytest.mark.slow
def test_nehari_properties_on_random_fields(problem) -> None:
    spec, domain = problem
    levels = np.linspace(0.2, 3.0, 50)
    for u in _random_fields(domain, 200):
        point = project_nehari(spec, domain, u)
        assert point.nehari_residual <= 1e-10
        assert nehari_residual(spec, domain, point.field) == point.nehari_residual
        assert point.energy > 0.0
        scale = float(np.max(np.abs(point.field.values)))
        for factor in (0.1, 10.0):
            rescaled = project_nehari(spec, domain, factor * u).field
            assert np.max(np.abs(rescaled.values - point.field.values)) <= 1e-12 * scale
        peak = energy(spec, domain, point.field)
        for s in levels:
            assert energy(spec, domain, s * point.field) <= peak * (1.0 + 1e-12)


def test_projection_is_scale_invariant(problem) -> None:
    spec, domain = problem
    for u in _random_fields(domain, 5, seed=1):
        reference = project_nehari(spec, domain, u).energy
        for s in (0.1, 3.0, 250.0):
            scaled = project_nehari(spec, domain, s * u).energy
            assert scaled == pytest.approx(reference, rel=1e-12)


@pytest.mark.slow
def test_gradient_represents_the_derivative(problem) -> None:
    spec, domain = problem
    rng = np.random.default_rng(3)
    for index in range(100):
        u, v = smooth_random_field(domain, rng), smooth_random_field(domain, rng)
        gradient = gradient_theta(spec, domain, u)
        mismatch = abs(inner_theta(spec, domain, gradient, v) - derivative(spec, domain, u, v))
        assert mismatch <= 1e-9 * (1.0 + norm_theta(spec, domain, u)) * norm_theta(spec, domain, v)
        if index < 3:
            split = Field(domain, u.values - apply_L(spec, domain, u).values - apply_G(spec, domain, u).values)
            assert np.allclose(split.values, gradient.values, rtol=1e-10, atol=1e-12)


@pytest.mark.slow
def test_centred_differences_converge_at_second_order(problem) -> None:
    spec, domain = problem
    rng = np.random.default_rng(7)
    slopes = []
    for _ in range(100):
        u, v = smooth_random_field(domain, rng), smooth_random_field(domain, rng)
        exact = derivative(spec, domain, u, v)
        # p = 4: the centred quotient is exact up to -h^2 * integral of c u v^3
        cubic = float(np.dot(domain.quadrature_weights * spec.c, u.values * v.values**3))
        errors = []
        for step in STEPS:
            centred = (energy(spec, domain, u + step * v) - energy(spec, domain, u - step * v)) / (2 * step)
            allowance = _centred_roundoff(spec, domain, u, v, step)
            assert abs(centred - exact + step**2 * cubic) <= allowance
            errors.append((abs(centred - exact), abs(cubic) * step**2, allowance))
        (coarse, coarse_model, coarse_slack), (fine, fine_model, fine_slack) = errors[:2]
        if coarse_model >= 100 * coarse_slack and fine_model >= 100 * fine_slack:
            slopes.append(math.log10(coarse / fine))
    assert len(slopes) >= 10
    assert np.allclose(slopes, 2.0, atol=0.01)


def test_derivative_matches_centred_differences() -> None:
    domain = make_preset("torus-factor", 256)
    spec = build_problem(domain, 4.0)
    u = Field.from_function(domain, lambda t: 1.0 + 0.3 * np.cos(t))
    v = Field.from_function(domain, lambda t: 1.0 + 0.5 * np.sin(t))
    exact = derivative(spec, domain, u, v)

    def centred(eps: float) -> float:
        return (energy(spec, domain, u + eps * v) - energy(spec, domain, u - eps * v)) / (2 * eps)

    coarse = abs(centred(1e-2) - exact)
    fine = abs(centred(1e-3) - exact)
    assert fine < coarse
    assert coarse / fine == pytest.approx(100.0, rel=0.1)


def test_l_operator_respects_the_contraction_constant() -> None:
    domain = make_preset("suspension-sphere(2)", 128)
    spec = build_problem(domain, 4.0, b=2.0, theta=3.0)
    assert spec.mu == pytest.approx(1.0, abs=1e-6)
    assert vetois_constant(spec) == pytest.approx(0.5, abs=1e-6)


@pytest.mark.slow
def test_contraction_holds_on_random_fields(problem) -> None:
    spec, domain = problem
    for u in _random_fields(domain, 100, seed=4):
        ratio = norm_theta(spec, domain, apply_L(spec, domain, u)) / norm_theta(spec, domain, u)
        assert ratio <= vetois_constant(spec)
        assert ratio <= l_operator_bound(spec) * (1.0 + 1e-12)


@pytest.mark.parametrize("preset_id", PRESETS)
@pytest.mark.parametrize("b0", [0.25, 0.5, 1.0, 2.0, 4.0])
def test_mu_for_constant_b(preset_id: str, b0: float) -> None:
    domain = make_preset(preset_id, 128)
    spec = build_problem(domain, 4.0, b=b0)
    if b0 <= 1.0 or not domain.is_periodic:
        assert spec.mu == pytest.approx(min(1.0, b0), abs=1e-6)
    else:
        # no zero-mass node on a circle: the top stiffness mode keeps mu just above 1
        assert 1.0 - 1e-10 <= spec.mu <= 1.0 + (b0 - 1.0) / (first_invariant_eigenvalue(domain) + 1.0)


def test_l_operator_bound_with_variable_b() -> None:
    domain = make_preset("torus-factor", 128)
    spec = build_problem(domain, 4.0, b=lambda t: 1.0 + 0.5 * np.cos(t))
    bound = l_operator_bound(spec)
    assert 0.0 < bound < 1.0
    for u in _random_fields(domain, 20, seed=5):
        ratio = norm_theta(spec, domain, apply_L(spec, domain, u)) / norm_theta(spec, domain, u)
        assert ratio <= bound + 1e-12


def test_constant_solution_is_critical(problem) -> None:
    spec, domain = problem
    u = constant_solution(spec, domain)
    assert np.allclose(u.values, math.sqrt(2.0))
    # J(sqrt 2) = (2 - 1) * vol for b = 2, c = 1, p = 4
    assert energy(spec, domain, u) == pytest.approx(integrate(domain, 1.0), rel=1e-12)
    assert np.max(np.abs(gradient_theta(spec, domain, u).values)) <= 1e-12
    for v in _random_fields(domain, 3, seed=6):
        assert abs(derivative(spec, domain, u, v)) <= 1e-10 * quadratic_b(spec, domain, v, v) ** 0.5


def test_zero_field_cannot_be_projected(problem) -> None:
    spec, domain = problem
    with pytest.raises(ProjectionError):
        project_nehari(spec, domain, 0.0)
    with pytest.raises(ProjectionError):
        project_nodal_nehari(spec, domain, 0.0)


@pytest.mark.parametrize(
    "preset_id, frequency, expected",
    [
        ("suspension-sphere(2)", 1, 1),
        ("suspension-sphere(2)", 2, 2),
        ("torus-factor", 1, 2),
        ("torus-factor", 2, 4),
    ],
)
def test_sign_changes_of_cosines(preset_id, frequency, expected) -> None:
    domain = make_preset(preset_id, 128)
    u = Field.from_function(domain, lambda t: np.cos(frequency * t))
    assert sign_changes(domain, u) == expected
    assert sign_changes(domain, u.positive_part()) == 0


def test_nodal_components_wrap_on_periodic_domains() -> None:
    domain = make_preset("torus-factor", 128)
    components = nodal_components(domain, Field.from_function(domain, np.cos))
    assert len(components) == 2
    assert 0 in components[0] and domain.size - 1 in components[0]


def test_nodal_projection_balances_every_component() -> None:
    domain = make_preset("torus-factor", 128)
    spec = build_problem(domain, 4.0)
    u = Field.from_function(domain, lambda t: np.cos(t) + 0.3 * np.sin(2 * t))
    point = project_nodal_nehari(spec, domain, u)
    assert sign_changes(domain, point.field) == sign_changes(domain, u)
    for run in nodal_components(domain, point.field):
        piece = np.zeros(domain.size)
        piece[run] = point.field.values[run]
        scale = quadratic_b(spec, domain, piece, piece)
        assert abs(derivative(spec, domain, point.field, piece)) <= 1e-9 * scale
    assert point.nehari_residual <= 1e-9


def test_nodal_projection_of_a_positive_field_is_the_plain_projection() -> None:
    domain = make_preset("torus-factor", 128)
    spec = build_problem(domain, 4.0)
    u = Field.from_function(domain, lambda t: 1.0 + 0.5 * np.cos(t))
    nodal = project_nodal_nehari(spec, domain, u)
    plain = project_nehari(spec, domain, u)
    assert np.array_equal(nodal.field.values, plain.field.values)
    assert nodal.energy == plain.energy
