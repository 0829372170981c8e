"""Weighted one-dimensional leaf spaces carrying the pushforward volume."""

from __future__ import annotations

from dataclasses import dataclass, field
import json
import logging
import math
from pathlib import Path
from typing import IO, Any, Callable, Mapping

import numpy as np

from .presets import EndpointKind, FoliationPreset, get_preset

LOGGER = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
MIN_RESOLUTION = 8
MIN_SAMPLES = 10_000
MASS_RTOL = 1e-2

Sampler = Callable[[np.random.Generator, int], np.ndarray]
QuotientMap = Callable[[np.ndarray], np.ndarray]


class DomainError(ValueError):
    """Raised when a weighted domain violates one of its invariants."""


class DomainMismatchError(ValueError):
    """Raised when a sampled function does not live on the given domain."""


class UnderSamplingError(RuntimeError):
    """Raised when a Monte-Carlo pushforward leaves interior bins empty."""

    def __init__(self, message: str, empty_bins: tuple[int, ...] = ()) -> None:
        super().__init__(message)
        self.empty_bins = empty_bins


class UnboundedMapError(ValueError):
    """Raised when a quotient map produces non-finite values."""


@dataclass(frozen=True, eq=False)
class WeightedDomain:
    """Discretised leaf space: nodes, leaf-volume density and end markers.

    Vertex-centred domains (analytic presets) carry the trapezoid rule with
    nodes on both ends. Cell-centred domains (Monte-Carlo pushforwards) put
    one node at each bin midpoint and let it own the full bin, so their total
    mass is exact. Periodic domains keep N distinct nodes; node N-1 is
    adjacent to node 0.
    """

    name: str
    nodes: np.ndarray
    weights: np.ndarray
    length: float
    start_kind: EndpointKind
    end_kind: EndpointKind
    ambient_dim: int
    kappa: int
    volume: float
    cell_centered: bool = False
    stderr: np.ndarray | None = None
    meta: Mapping[str, Any] = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "start_kind", EndpointKind(self.start_kind))
        object.__setattr__(self, "end_kind", EndpointKind(self.end_kind))
        if self.stderr is not None:
            object.__setattr__(self, "stderr", np.asarray(self.stderr, dtype=float))
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise DomainError("nodes and weights must be one-dimensional arrays of equal length")
        minimum = 1 if self.cell_centered else 2
        if nodes.size < minimum:
            raise DomainError(f"domain needs at least {minimum} node(s)")
        if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(weights))):
            raise DomainError("nodes and weights must be finite")
        if np.any(np.diff(nodes) <= 0.0):
            raise DomainError("nodes must be strictly increasing")
        if np.any(weights < 0.0):
            raise DomainError("weights must be nonnegative")
        interior = weights if self.cell_centered or self.is_periodic else weights[1:-1]
        if np.any(interior <= 0.0):
            raise DomainError("weights must be positive at interior nodes")
        if (self.start_kind is EndpointKind.PERIODIC) != (self.end_kind is EndpointKind.PERIODIC):
            raise DomainError("periodic domains must be periodic at both ends")
        if not 0 <= self.kappa < self.ambient_dim:
            raise DomainError(f"minimal leaf dimension {self.kappa} must lie in [0, {self.ambient_dim})")
        if self.stderr is not None and self.stderr.shape != weights.shape:
            raise DomainError("stderr must match the weights")

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def is_periodic(self) -> bool:
        return self.start_kind is EndpointKind.PERIODIC

    @property
    def has_fixed_points(self) -> bool:
        return self.kappa == 0

    @property
    def spacing(self) -> float:
        if self.cell_centered or self.is_periodic:
            return self.length / self.size
        return self.length / (self.size - 1)

    @property
    def quadrature_weights(self) -> np.ndarray:
        """Per-node masses q_i with sum(q) approximating vol(M)."""

        cached = self._cache.get("quadrature")
        if cached is None:
            widths = np.full(self.size, self.spacing)
            if not (self.cell_centered or self.is_periodic):
                widths[0] *= 0.5
                widths[-1] *= 0.5
            cached = self.weights * widths
            cached.setflags(write=False)
            self._cache["quadrature"] = cached
        return cached

    @property
    def interior(self) -> np.ndarray:
        """Boolean mask of nodes away from non-periodic vertex ends."""

        mask = np.ones(self.size, dtype=bool)
        if not (self.cell_centered or self.is_periodic):
            mask[0] = mask[-1] = False
        return mask

    def sample(self, function: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        return np.asarray(function(self.nodes), dtype=float) * np.ones(self.size)


def make_preset(name: str | FoliationPreset, resolution: int, **params: Any) -> WeightedDomain:
    """Discretise a registered preset with ``resolution`` cells."""

    if resolution < MIN_RESOLUTION:
        raise DomainError(f"resolution must be at least {MIN_RESOLUTION}, got {resolution}")
    preset = name if isinstance(name, FoliationPreset) else get_preset(name, **params)
    if preset.is_periodic:
        nodes = np.arange(resolution) * (preset.length / resolution)
    else:
        nodes = np.linspace(0.0, preset.length, resolution + 1)
    weights = np.asarray(preset.weight(nodes), dtype=float) * np.ones_like(nodes)
    if not preset.is_periodic:
        # sin(pi) and cos(pi/2) are not exactly zero
        for index, kind in ((0, preset.start_kind), (-1, preset.end_kind)):
            if kind is EndpointKind.SINGULAR_LEAF and abs(weights[index]) < 1e-12 * np.max(np.abs(weights)):
                weights[index] = 0.0
    if preset.kappa == 0:
        LOGGER.warning("Preset %s has fixed points (minimal leaf dimension 0)", preset.preset_id)
    return WeightedDomain(
        name=preset.preset_id,
        nodes=nodes,
        weights=weights,
        length=preset.length,
        start_kind=preset.start_kind,
        end_kind=preset.end_kind,
        ambient_dim=preset.ambient_dim,
        kappa=preset.kappa,
        volume=preset.volume,
        meta={"preset": preset.preset_id, "construction": preset.construction.value, "resolution": resolution},
    )


def nodal_values(domain: WeightedDomain, f: Any) -> np.ndarray:
    """Nodal values of a scalar, array or Field living on ``domain``."""

    owner = getattr(f, "domain", None)
    if owner is not None and owner is not domain:
        raise DomainMismatchError(f"field lives on {owner.name!r}, not on {domain.name!r}")
    values = getattr(f, "values", f)
    if np.isscalar(values):
        return np.full(domain.size, float(values))
    array = np.asarray(values, dtype=float)
    if array.shape != (domain.size,):
        raise DomainMismatchError(f"expected {domain.size} nodal values, got shape {array.shape}")
    return array


def integrate(domain: WeightedDomain, f: Any) -> float:
    """Quadrature of f against the pushforward measure."""

    return float(np.dot(domain.quadrature_weights, nodal_values(domain, f)))


def uniform_sphere_sampler(dim: int) -> Sampler:
    """Uniform samples on the unit sphere S^(dim-1) in R^dim."""

    def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        points = rng.standard_normal((size, dim))
        return points / np.linalg.norm(points, axis=1, keepdims=True)

    return sampler


def pushforward_mc(
    sampler: Sampler,
    quotient_map: QuotientMap,
    bins: int,
    samples: int,
    volume: float,
    *,
    seed: int = 0,
    bounds: tuple[float, float] | None = None,
    batch_size: int = 100_000,
    name: str = "pushforward",
    ambient_dim: int = 2,
    kappa: int = 1,
    meta: Mapping[str, Any] | None = None,
) -> WeightedDomain:
    """Histogram the pushforward of the ambient volume under ``quotient_map``.

    Batches draw from independent child streams of one seed sequence, so the
    result only depends on ``seed``, ``samples`` and ``batch_size``.
    """

    if samples < MIN_SAMPLES:
        raise ValueError(f"samples must be at least {MIN_SAMPLES}")
    if bins < 1:
        raise ValueError("bins must be positive")
    sizes = [batch_size] * (samples // batch_size)
    if samples % batch_size:
        sizes.append(samples % batch_size)
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    values = np.empty(samples)
    offset = 0
    for size, stream in zip(sizes, streams):
        mapped = np.asarray(quotient_map(sampler(np.random.default_rng(stream), size)), dtype=float)
        if mapped.shape != (size,):
            raise UnboundedMapError(f"quotient map returned shape {mapped.shape} for a batch of {size}")
        if not np.all(np.isfinite(mapped)):
            raise UnboundedMapError("quotient map produced non-finite values")
        values[offset : offset + size] = mapped
        offset += size
        LOGGER.debug("Pushed forward %d/%d samples", offset, samples)

    lower, upper = bounds if bounds is not None else (float(values.min()), float(values.max()))
    if upper - lower <= 1e-12 * max(1.0, abs(lower)):
        LOGGER.info("Quotient map is constant; emitting a single-leaf domain")
        return WeightedDomain(
            name=name,
            nodes=np.array([lower]),
            weights=np.array([volume]),
            length=1.0,
            start_kind=EndpointKind.REGULAR,
            end_kind=EndpointKind.REGULAR,
            ambient_dim=ambient_dim,
            kappa=kappa,
            volume=volume,
            cell_centered=True,
            stderr=np.zeros(1),
            meta={**(meta or {}), "samples": samples, "bins": 1, "seed": seed, "degenerate": True},
        )
    if np.any((values < lower) | (values > upper)):
        raise UnboundedMapError(f"quotient map values leave the bounds [{lower}, {upper}]")

    counts, edges = np.histogram(values, bins=bins, range=(lower, upper))
    occupied = np.flatnonzero(counts)
    first, last = int(occupied[0]), int(occupied[-1])
    empty = tuple(int(index) for index in np.flatnonzero(counts[first : last + 1] == 0) + first)
    if empty:
        raise UnderSamplingError(f"{len(empty)} empty interior bin(s); increase samples or reduce bins", empty)
    if first > 0 or last < bins - 1:
        LOGGER.debug("Trimming %d empty edge bin(s)", first + bins - 1 - last)
    counts = counts[first : last + 1].astype(float)
    width = edges[1] - edges[0]
    scale = volume / (samples * width)
    density = counts * scale
    stderr = scale * np.sqrt(counts * (1.0 - counts / samples))
    nodes = 0.5 * (edges[first : last + 1] + edges[first + 1 : last + 2])

    # an edge bin holding much less than its neighbour signals a vanishing weight
    def _kind(edge: float, inner: float) -> EndpointKind:
        return EndpointKind.SINGULAR_LEAF if edge < 0.5 * inner else EndpointKind.REGULAR

    start_kind = _kind(density[0], density[1]) if density.size > 1 else EndpointKind.REGULAR
    end_kind = _kind(density[-1], density[-2]) if density.size > 1 else EndpointKind.REGULAR
    return WeightedDomain(
        name=name,
        nodes=nodes,
        weights=density,
        length=width * counts.size,
        start_kind=start_kind,
        end_kind=end_kind,
        ambient_dim=ambient_dim,
        kappa=kappa,
        volume=volume,
        cell_centered=True,
        stderr=stderr,
        meta={**(meta or {}), "samples": samples, "bins": bins, "seed": seed, "bounds": [lower, upper]},
    )


def domain_to_dict(domain: WeightedDomain) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": domain.name,
        "nodes": domain.nodes.tolist(),
        "weights": domain.weights.tolist(),
        "stderr": None if domain.stderr is None else domain.stderr.tolist(),
        "length": domain.length,
        "start_kind": domain.start_kind.value,
        "end_kind": domain.end_kind.value,
        "ambient_dim": domain.ambient_dim,
        "kappa": domain.kappa,
        "volume": domain.volume,
        "cell_centered": domain.cell_centered,
        "meta": dict(domain.meta),
    }


_REQUIRED_FIELDS = {"nodes", "weights", "length", "start_kind", "end_kind", "ambient_dim", "kappa", "volume"}


def domain_from_dict(data: Mapping[str, Any]) -> WeightedDomain:
    if data.get("schema_version") != SCHEMA_VERSION:
        raise DomainError(f"Unsupported domain schema_version: {data.get('schema_version')!r}")
    missing = _REQUIRED_FIELDS - set(data)
    if missing:
        raise DomainError(f"Domain document missing required fields: {', '.join(sorted(missing))}")
    domain = WeightedDomain(
        name=str(data.get("name", "domain")),
        nodes=np.asarray(data["nodes"], dtype=float),
        weights=np.asarray(data["weights"], dtype=float),
        length=float(data["length"]),
        start_kind=EndpointKind(data["start_kind"]),
        end_kind=EndpointKind(data["end_kind"]),
        ambient_dim=int(data["ambient_dim"]),
        kappa=int(data["kappa"]),
        volume=float(data["volume"]),
        cell_centered=bool(data.get("cell_centered", False)),
        stderr=None if data.get("stderr") is None else np.asarray(data["stderr"], dtype=float),
        meta=dict(data.get("meta", {})),
    )
    mass = integrate(domain, 1.0)
    # trapezoid mass error is O(h^2)
    tolerance = max(MASS_RTOL, 2.0 * domain.spacing**2)
    if not math.isclose(mass, domain.volume, rel_tol=tolerance):
        raise DomainError(f"Domain mass {mass:.6g} does not match its volume {domain.volume:.6g}")
    return domain


def write_domain(domain: WeightedDomain, target: str | Path | IO[str]) -> None:
    text = json.dumps(domain_to_dict(domain), sort_keys=True, indent=2)
    if hasattr(target, "write"):
        target.write(text)  # type: ignore[union-attr]
        return
    Path(target).write_text(text, encoding="utf-8")


def read_domain(source: str | Path | IO[str]) -> WeightedDomain:
    text = source.read() if hasattr(source, "read") else Path(source).read_text(encoding="utf-8")  # type: ignore[union-attr]
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DomainError(f"Invalid domain JSON: {exc}") from exc
    return domain_from_dict(data)


__all__ = [
    "DomainError",
    "DomainMismatchError",
    "MIN_RESOLUTION",
    "SCHEMA_VERSION",
    "UnboundedMapError",
    "UnderSamplingError",
    "WeightedDomain",
    "domain_from_dict",
    "domain_to_dict",
    "integrate",
    "make_preset",
    "nodal_values",
    "pushforward_mc",
    "read_domain",
    "uniform_sphere_sampler",
    "write_domain",
]
