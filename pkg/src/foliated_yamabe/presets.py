"""Registry of analytic leaf-space presets."""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from enum import Enum
import math
from typing import Any, Callable, Mapping

import numpy as np
from scipy import special

WeightFunction = Callable[[np.ndarray], np.ndarray]


class EndpointKind(str, Enum):
    SINGULAR_LEAF = "singular-leaf"
    PERIODIC = "periodic"
    REGULAR = "regular"


class Construction(str, Enum):
    HOMOGENEOUS = "homogeneous"
    ISOPARAMETRIC = "isoparametric"
    RFKM = "rfkm"
    PRODUCT = "product"
    CUSTOM = "custom"


@dataclass(frozen=True)
class FoliationPreset:
    name: str
    description: str
    ambient_dim: int
    kappa: int
    length: float
    weight: WeightFunction
    volume: float
    start_kind: EndpointKind
    end_kind: EndpointKind
    construction: Construction
    scalar_curvature: float | None = None
    first_invariant_eigenvalue: float | None = None
    default_b: float = 1.0
    default_c: float = 1.0
    params: Mapping[str, Any] = field(default_factory=dict)
    log_derivative: WeightFunction | None = None

    @property
    def preset_id(self) -> str:
        if not self.params:
            return self.name
        inner = ",".join(f"{key}={value}" for key, value in self.params.items())
        return f"{self.name}({inner})"

    @property
    def is_periodic(self) -> bool:
        return self.start_kind is EndpointKind.PERIODIC


class PresetNotFoundError(ValueError):
    """Raised when a preset id does not name a registered leaf space."""


def sphere_volume(k: int) -> float:
    """Volume of the round unit sphere S^k."""

    return 2.0 * math.pi ** ((k + 1) / 2) / float(special.gamma((k + 1) / 2))


def _suspension_sphere(m: int = 2) -> FoliationPreset:
    if m < 2:
        raise ValueError("suspension-sphere needs m >= 2")
    leaf_volume = sphere_volume(m - 1)
    return FoliationPreset(
        name="suspension-sphere",
        description=f"S^{m} foliated by the latitude spheres S^{m - 1} of the SO({m}) suspension",
        ambient_dim=m,
        kappa=0,
        length=math.pi,
        weight=lambda t: leaf_volume * np.sin(t) ** (m - 1),
        volume=sphere_volume(m),
        start_kind=EndpointKind.SINGULAR_LEAF,
        end_kind=EndpointKind.SINGULAR_LEAF,
        construction=Construction.HOMOGENEOUS,
        scalar_curvature=float(m * (m - 1)),
        first_invariant_eigenvalue=float(m),
        params={"m": m},
        log_derivative=lambda t: (m - 1) / np.tan(t),
    )


def _okon_sphere(k: int = 2, n: int = 2) -> FoliationPreset:
    if k < 1 or n < 1 or k + n < 3:
        raise ValueError("okon-sphere needs k, n >= 1 and k + n >= 3")
    factor = sphere_volume(k - 1) * sphere_volume(n - 1)
    dim = k + n - 1
    return FoliationPreset(
        name="okon-sphere",
        description=f"S^{dim} foliated by the O({k})xO({n}) orbits S^{k - 1}xS^{n - 1}",
        ambient_dim=dim,
        kappa=min(k, n) - 1,
        length=math.pi / 2,
        weight=lambda t: factor * np.cos(t) ** (k - 1) * np.sin(t) ** (n - 1),
        volume=sphere_volume(dim),
        start_kind=EndpointKind.SINGULAR_LEAF if n >= 2 else EndpointKind.REGULAR,
        end_kind=EndpointKind.SINGULAR_LEAF if k >= 2 else EndpointKind.REGULAR,
        construction=Construction.HOMOGENEOUS,
        scalar_curvature=float(dim * (dim - 1)),
        first_invariant_eigenvalue=float(2 * (k + n)),
        params={"k": k, "n": n},
        log_derivative=lambda t: (n - 1) / np.tan(t) - (k - 1) * np.tan(t),
    )


def _torus_factor() -> FoliationPreset:
    return FoliationPreset(
        name="torus-factor",
        description="Flat torus S^1xS^1 foliated by the circles of one factor",
        ambient_dim=2,
        kappa=1,
        length=2.0 * math.pi,
        weight=lambda t: np.full_like(np.asarray(t, dtype=float), 2.0 * math.pi),
        volume=(2.0 * math.pi) ** 2,
        start_kind=EndpointKind.PERIODIC,
        end_kind=EndpointKind.PERIODIC,
        construction=Construction.PRODUCT,
        scalar_curvature=0.0,
        first_invariant_eigenvalue=1.0,
        log_derivative=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
    )


def _fkm(q: int = 1, copies: int = 2) -> FoliationPreset:
    from .clifford import fkm_multiplicities_for, minimal_dimension

    n = copies * minimal_dimension(q)
    m1, m2 = fkm_multiplicities_for(q, copies)
    if m2 < 0:
        raise ValueError(f"fkm(q={q},copies={copies}) is degenerate: the FKM function is constant on S^{n - 1}")
    volume = sphere_volume(n - 1)
    # integral of sin^m1(2t) cos^m2(2t) over [0, pi/4]
    normaliser = 0.25 * special.beta((m1 + 1) / 2, (m2 + 1) / 2)
    scale = volume / normaliser
    return FoliationPreset(
        name="fkm",
        description=f"S^{n - 1} foliated by the FKM isoparametric hypersurfaces of a q={q} Clifford system",
        ambient_dim=n - 1,
        kappa=n - 2 - max(m1, m2),
        length=math.pi / 4,
        weight=lambda t: scale * np.sin(2.0 * t) ** m1 * np.cos(2.0 * t) ** m2,
        volume=volume,
        start_kind=EndpointKind.SINGULAR_LEAF,
        end_kind=EndpointKind.SINGULAR_LEAF if m2 > 0 else EndpointKind.REGULAR,
        construction=Construction.ISOPARAMETRIC,
        scalar_curvature=float((n - 1) * (n - 2)),
        params={"q": q, "copies": copies},
        log_derivative=lambda t: 2.0 * m1 / np.tan(2.0 * t) - 2.0 * m2 * np.tan(2.0 * t),
    )


def _custom(
    weight: WeightFunction | None = None,
    length: float | None = None,
    volume: float | None = None,
    ambient_dim: int = 2,
    kappa: int = 1,
    periodic: bool = False,
    singular_ends: tuple[bool, bool] = (False, False),
) -> FoliationPreset:
    if weight is None or length is None or volume is None:
        raise ValueError("custom presets need weight, length and volume")
    if periodic:
        kinds = (EndpointKind.PERIODIC, EndpointKind.PERIODIC)
    else:
        kinds = tuple(EndpointKind.SINGULAR_LEAF if flag else EndpointKind.REGULAR for flag in singular_ends)
    return FoliationPreset(
        name="custom",
        description="User supplied leaf-space weight",
        ambient_dim=int(ambient_dim),
        kappa=int(kappa),
        length=float(length),
        weight=weight,
        volume=float(volume),
        start_kind=kinds[0],
        end_kind=kinds[1],
        construction=Construction.CUSTOM,
    )


@dataclass(frozen=True)
class _PresetFactory:
    name: str
    description: str
    parameters: tuple[str, ...]
    build: Callable[..., FoliationPreset]


_BUILTINS: dict[str, _PresetFactory] = {
    "suspension-sphere": _PresetFactory("suspension-sphere", "S^m under the SO(m) suspension action", ("m",), _suspension_sphere),
    "okon-sphere": _PresetFactory("okon-sphere", "S^(k+n-1) under O(k)xO(n)", ("k", "n"), _okon_sphere),
    "torus-factor": _PresetFactory("torus-factor", "Flat torus foliated by circles", (), _torus_factor),
    "fkm": _PresetFactory("fkm", "FKM isoparametric foliation of a Clifford system", ("q", "copies"), _fkm),
    "custom": _PresetFactory("custom", "User supplied weight, length and volume", ("weight", "length", "volume"), _custom),
}


def parse_preset_id(text: str) -> tuple[str, dict[str, Any]]:
    """Split ``"okon-sphere(2,2)"`` or ``"suspension-sphere(m=3)"`` into name and parameters."""

    stripped = text.strip()
    if not stripped:
        raise PresetNotFoundError("Empty preset id")
    if "(" not in stripped:
        return stripped.casefold(), {}
    if not stripped.endswith(")"):
        raise PresetNotFoundError(f"Preset ids must be of the form name(args): {text}")
    open_paren = stripped.find("(")
    name = stripped[:open_paren].strip().casefold()
    args_text = stripped[open_paren + 1 : -1].strip()
    factory = _factory(name)
    params: dict[str, Any] = {}
    if not args_text:
        return name, params
    for position, piece in enumerate(part.strip() for part in args_text.split(",")):
        key, sep, value = piece.partition("=")
        if sep:
            key = key.strip()
        else:
            if position >= len(factory.parameters):
                raise PresetNotFoundError(f"Too many parameters for preset '{name}'")
            key, value = factory.parameters[position], piece
        try:
            params[key] = ast.literal_eval(value.strip())
        except (ValueError, SyntaxError) as exc:
            raise PresetNotFoundError(f"Unable to parse preset parameter {piece!r}") from exc
    return name, params


def _factory(name: str) -> _PresetFactory:
    try:
        return _BUILTINS[name]
    except KeyError as exc:
        available = ", ".join(sorted(_BUILTINS))
        raise PresetNotFoundError(f"Unknown preset '{name}'. Available presets: {available}") from exc


def get_preset(preset_id: str, **overrides: Any) -> FoliationPreset:
    name, params = parse_preset_id(preset_id)
    params.update(overrides)
    factory = _factory(name)
    try:
        return factory.build(**params)
    except TypeError as exc:
        raise PresetNotFoundError(f"Invalid parameters for preset '{name}': {exc}") from exc


def list_presets() -> list[_PresetFactory]:
    return [_BUILTINS[name] for name in sorted(_BUILTINS)]


__all__ = [
    "Construction",
    "EndpointKind",
    "FoliationPreset",
    "PresetNotFoundError",
    "get_preset",
    "list_presets",
    "parse_preset_id",
    "sphere_volume",
]
