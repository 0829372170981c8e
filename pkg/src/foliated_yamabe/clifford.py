"""Clifford systems and the FKM isoparametric functions they induce on spheres."""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
import logging
import math
from typing import Any, Mapping

import numpy as np

from .presets import sphere_volume
from .quotient import WeightedDomain, pushforward_mc, uniform_sphere_sampler

LOGGER = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
SUPPORTED_Q = (1, 2, 3, 4, 5)
UNIT_TOLERANCE = 1e-12
DEGENERATE_SPREAD = 1e-9

_SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.int64)
_SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.int64)
_EPSILON = np.array([[0, -1], [1, 0]], dtype=np.int64)
_I2 = np.eye(2, dtype=np.int64)


class UnsupportedCliffordError(ValueError):
    """Raised for a Clifford rank outside the supported table."""


class DegenerateFoliationError(ValueError):
    """Raised when the FKM function of a system is constant on the sphere."""


class NonUnitVectorError(ValueError):
    """Raised when pi_rho or fkm_value receives a vector off the unit sphere."""


def _kron(*factors: np.ndarray) -> np.ndarray:
    return reduce(np.kron, factors)


def _complex_structures(count: int) -> list[np.ndarray]:
    """``count`` pairwise anticommuting skew matrices squaring to -Id."""

    if count == 0:
        return [np.eye(1, dtype=np.int64)]
    if count == 1:
        return [_EPSILON]
    if count == 2:
        return [_kron(_EPSILON, _SIGMA_Z), _kron(_EPSILON, _SIGMA_X)]
    if count == 3:
        return [_kron(_EPSILON, _SIGMA_Z), _kron(_EPSILON, _SIGMA_X), _kron(_I2, _EPSILON)]
    if count == 4:
        lower = _complex_structures(3)
        return [_kron(item, _SIGMA_Z) for item in lower] + [_kron(np.eye(4, dtype=np.int64), _EPSILON)]
    raise UnsupportedCliffordError(f"No complex-structure table for {count} generators")


def minimal_dimension(q: int) -> int:
    """Size of the smallest representation built for a rank-q system."""

    if q not in SUPPORTED_Q:
        raise UnsupportedCliffordError(f"q must be one of {SUPPORTED_Q}, got {q}")
    return 2 * _complex_structures(q - 1)[0].shape[0]


def fkm_multiplicities_for(q: int, copies: int) -> tuple[int, int]:
    """Multiplicities (m1, m2) of the FKM foliation of ``copies`` irreducible blocks."""

    if copies < 1:
        raise ValueError("copies must be at least 1")
    half = copies * minimal_dimension(q) // 2
    return q, half - q - 1


@dataclass(frozen=True, eq=False)
class CliffordSystem:
    q: int
    copies: int
    matrices: tuple[np.ndarray, ...]

    @property
    def n(self) -> int:
        return int(self.matrices[0].shape[0])

    @property
    def stacked(self) -> np.ndarray:
        return np.stack(self.matrices)

    def check_relations(self) -> list[tuple[int, int]]:
        """Return every pair (i, j) violating P_iP_j + P_jP_i = 2 delta_ij Id."""

        identity = np.eye(self.n, dtype=np.int64)
        violations: list[tuple[int, int]] = []
        for i, left in enumerate(self.matrices):
            if not np.array_equal(left, left.T):
                violations.append((i, i))
                continue
            for j in range(i, len(self.matrices)):
                right = self.matrices[j]
                expected = 2 * identity if i == j else 0 * identity
                if not np.array_equal(left @ right + right @ left, expected):
                    violations.append((i, j))
        return violations

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "q": self.q,
            "copies": self.copies,
            "n": self.n,
            "matrices": [matrix.tolist() for matrix in self.matrices],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CliffordSystem":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"Unsupported Clifford schema_version: {data.get('schema_version')!r}")
        missing = {"q", "copies", "matrices"} - set(data)
        if missing:
            raise ValueError(f"Clifford document missing required fields: {', '.join(sorted(missing))}")
        matrices = tuple(np.asarray(matrix, dtype=np.int64) for matrix in data["matrices"])
        system = cls(q=int(data["q"]), copies=int(data["copies"]), matrices=matrices)
        if len(matrices) != system.q + 1:
            raise ValueError(f"Expected {system.q + 1} matrices, got {len(matrices)}")
        violations = system.check_relations()
        if violations:
            raise ValueError(f"Clifford relations violated for pairs {violations}")
        return system


def build_clifford_system(q: int, copies: int = 1) -> CliffordSystem:
    """Rank-q Clifford system on R^n with n = copies * minimal_dimension(q)."""

    if q not in SUPPORTED_Q:
        raise UnsupportedCliffordError(f"q must be one of {SUPPORTED_Q}, got {q}")
    if copies < 1:
        raise ValueError("copies must be at least 1")
    structures = _complex_structures(q - 1)
    delta = structures[0].shape[0]
    identity = np.eye(delta, dtype=np.int64)
    blocks = [_kron(_SIGMA_Z, identity), _kron(_SIGMA_X, identity)]
    if q > 1:
        blocks.extend(_kron(_EPSILON, structure) for structure in structures)
    repeat = np.eye(copies, dtype=np.int64)
    matrices = tuple(_kron(repeat, block) for block in blocks)
    system = CliffordSystem(q=q, copies=copies, matrices=matrices)
    LOGGER.debug("Built Clifford system q=%d copies=%d on R^%d", q, copies, system.n)
    return system


def _as_unit_batch(system: CliffordSystem, x: np.ndarray) -> tuple[np.ndarray, bool]:
    points = np.asarray(x, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    if points.shape[1] != system.n:
        raise ValueError(f"expected vectors of length {system.n}, got {points.shape[1]}")
    norms = np.linalg.norm(points, axis=1)
    if np.any(np.abs(norms - 1.0) > UNIT_TOLERANCE):
        raise NonUnitVectorError("input vectors must have unit norm within 1e-12")
    return points, single


def _components(system: CliffordSystem, points: np.ndarray) -> np.ndarray:
    return np.einsum("sj,kjl,sl->sk", points, system.stacked.astype(float), points)


def pi_rho(system: CliffordSystem, x: np.ndarray) -> np.ndarray:
    """Coordinates (<P_0 x, x>, ..., <P_q x, x>) of the Clifford moment map."""

    points, single = _as_unit_batch(system, x)
    values = _components(system, points)
    return values[0] if single else values


def fkm_value(system: CliffordSystem, x: np.ndarray) -> np.ndarray | float:
    points, single = _as_unit_batch(system, x)
    values = 1.0 - 2.0 * np.sum(_components(system, points) ** 2, axis=1)
    return float(values[0]) if single else values


def fkm_multiplicities(system: CliffordSystem) -> tuple[int, int]:
    return system.q, system.n // 2 - system.q - 1


def fkm_gradient_ratio(system: CliffordSystem, x: np.ndarray) -> np.ndarray:
    """|grad_S f|^2 / (1 - f^2); NaN where f = +-1."""

    points, _ = _as_unit_batch(system, x)
    components = _components(system, points)
    f = 1.0 - 2.0 * np.sum(components**2, axis=1)
    images = np.einsum("kjl,sl->skj", system.stacked.astype(float), points)
    gradient = -8.0 * np.einsum("sk,skj->sj", components, images)
    radial = np.sum(gradient * points, axis=1)
    tangential = gradient - radial[:, None] * points
    denominator = 1.0 - f**2
    ratio = np.full(f.shape, np.nan)
    usable = denominator > 1e-8
    ratio[usable] = np.sum(tangential[usable] ** 2, axis=1) / denominator[usable]
    return ratio


def fkm_quotient_domain(
    system: CliffordSystem,
    bins: int,
    samples: int,
    *,
    seed: int = 0,
    batch_size: int = 100_000,
) -> WeightedDomain:
    """Pushforward of the round volume of S^(n-1) to the arclength t = arccos(f)/g."""

    sampler = uniform_sphere_sampler(system.n)
    probe = sampler(np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0]), 4096)
    values = fkm_value(system, probe)
    if float(np.max(values) - np.min(values)) <= DEGENERATE_SPREAD:
        raise DegenerateFoliationError(
            f"FKM function of q={system.q}, n={system.n} is constant; the foliation is degenerate"
        )
    ratios = fkm_gradient_ratio(system, probe)
    g = math.sqrt(float(np.nanmedian(ratios)))
    LOGGER.info("FKM system q=%d n=%d has calibrated g=%.12g", system.q, system.n, g)
    m1, m2 = fkm_multiplicities(system)

    def quotient_map(points: np.ndarray) -> np.ndarray:
        return np.arccos(np.clip(fkm_value(system, points), -1.0, 1.0)) / g

    return pushforward_mc(
        sampler,
        quotient_map,
        bins,
        samples,
        sphere_volume(system.n - 1),
        seed=seed,
        bounds=(0.0, math.pi / g),
        batch_size=batch_size,
        name=f"fkm(q={system.q},copies={system.copies})",
        ambient_dim=system.n - 1,
        kappa=system.n - 2 - max(m1, m2),
        meta={
            "q": system.q,
            "copies": system.copies,
            "g": g,
            "multiplicities": [m1, m2],
            "analytic_weight": f"fkm(q={system.q},copies={system.copies})" if m2 >= 0 else None,
        },
    )


__all__ = [
    "CliffordSystem",
    "DegenerateFoliationError",
    "NonUnitVectorError",
    "SUPPORTED_Q",
    "UnsupportedCliffordError",
    "build_clifford_system",
    "fkm_gradient_ratio",
    "fkm_multiplicities",
    "fkm_multiplicities_for",
    "fkm_quotient_domain",
    "fkm_value",
    "minimal_dimension",
    "pi_rho",
]
