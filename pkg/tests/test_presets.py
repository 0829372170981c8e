import math

import numpy as np
import pytest
from scipy import integrate

from foliated_yamabe.presets import EndpointKind, PresetNotFoundError, get_preset, list_presets, parse_preset_id, sphere_volume


def test_list_presets_contains_expected_names() -> None:
    names = {preset.name for preset in list_presets()}
    assert {"suspension-sphere", "okon-sphere", "torus-factor", "fkm", "custom"} <= names


def test_parse_preset_id_accepts_positional_and_keyword_arguments() -> None:
    assert parse_preset_id("okon-sphere(2,2)") == ("okon-sphere", {"k": 2, "n": 2})
    assert parse_preset_id("suspension-sphere(m=3)") == ("suspension-sphere", {"m": 3})
    assert parse_preset_id("Torus-Factor") == ("torus-factor", {})


def test_unknown_preset_lists_available_names() -> None:
    with pytest.raises(PresetNotFoundError, match="Unknown preset"):
        get_preset("klein-bottle")
    with pytest.raises(PresetNotFoundError, match="Too many parameters"):
        get_preset("torus-factor(3)")


def test_preset_id_is_canonical() -> None:
    assert get_preset("suspension-sphere(2)").preset_id == "suspension-sphere(m=2)"
    assert get_preset("torus-factor").preset_id == "torus-factor"


def test_sphere_volumes() -> None:
    assert sphere_volume(1) == pytest.approx(2 * math.pi)
    assert sphere_volume(2) == pytest.approx(4 * math.pi)
    assert sphere_volume(3) == pytest.approx(2 * math.pi**2)
    assert sphere_volume(4) == pytest.approx(8 * math.pi**2 / 3)
    assert sphere_volume(5) == pytest.approx(math.pi**3)


@pytest.mark.parametrize(
    "preset_id",
    ["suspension-sphere(2)", "suspension-sphere(4)", "okon-sphere(2,2)", "okon-sphere(2,3)", "torus-factor", "fkm(q=1,copies=2)", "fkm(q=2,copies=2)"],
)
def test_weight_integrates_to_volume(preset_id: str) -> None:
    preset = get_preset(preset_id)
    total, _ = integrate.quad(lambda t: float(preset.weight(np.array([t]))[0]), 0.0, preset.length, limit=200)
    assert total == pytest.approx(preset.volume, rel=1e-8)


@pytest.mark.parametrize("preset_id", ["suspension-sphere(3)", "okon-sphere(2,2)", "okon-sphere(3,2)", "fkm(q=2,copies=2)"])
def test_log_derivative_matches_weight(preset_id: str) -> None:
    preset = get_preset(preset_id)
    step = 1e-6
    for t in np.linspace(0.1, 0.9, 5) * preset.length:
        values = preset.weight(np.array([t - step, t, t + step]))
        numeric = (values[2] - values[0]) / (2 * step * values[1])
        assert float(preset.log_derivative(t)) == pytest.approx(numeric, rel=1e-6, abs=1e-6)


def test_okon_sphere_metadata() -> None:
    preset = get_preset("okon-sphere(2,2)")
    assert preset.ambient_dim == 3
    assert preset.kappa == 1
    assert preset.first_invariant_eigenvalue == 8.0
    assert preset.start_kind is EndpointKind.SINGULAR_LEAF
    assert preset.end_kind is EndpointKind.SINGULAR_LEAF


def test_suspension_sphere_has_fixed_points() -> None:
    preset = get_preset("suspension-sphere(2)")
    assert preset.kappa == 0
    assert preset.scalar_curvature == 2.0


def test_fkm_preset_rejects_degenerate_system() -> None:
    with pytest.raises(ValueError, match="degenerate"):
        get_preset("fkm(q=1,copies=1)")


def test_fkm_preset_for_two_copies_of_the_rank_one_system() -> None:
    preset = get_preset("fkm(q=1,copies=2)")
    assert preset.ambient_dim == 3
    assert preset.kappa == 1
    assert preset.length == pytest.approx(math.pi / 4)
    assert preset.end_kind is EndpointKind.REGULAR
    assert float(preset.weight(np.array([math.pi / 8]))[0]) == pytest.approx(4 * math.pi**2 * math.sin(math.pi / 4))


def test_custom_preset_needs_weight_length_and_volume() -> None:
    with pytest.raises(ValueError, match="custom presets need"):
        get_preset("custom")
    preset = get_preset("custom", weight=lambda t: np.ones_like(t), length=2.0, volume=2.0, periodic=True)
    assert preset.is_periodic
