"""Weighted Sobolev calculus on a discretised leaf space."""

from __future__ import annotations

from dataclasses import dataclass
import logging
import math
from typing import Any, Callable, Union

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as sparse_linalg

from .presets import PresetNotFoundError, get_preset
from .quotient import DomainMismatchError, WeightedDomain, nodal_values

LOGGER = logging.getLogger(__name__)

DENSE_EIGEN_LIMIT = 1024
EIGEN_TOLERANCE = 1e-10
THETA_MARGIN = 1.5

Coefficient = Union[float, str, np.ndarray, Callable[[np.ndarray], np.ndarray]]


class ProblemSpecError(ValueError):
    """Raised when exponent, coefficients or flow parameter are out of range."""


class CoercivityError(RuntimeError):
    """Raised when the b-form is not coercive or its constant cannot be computed."""


class SingularSystemError(RuntimeError):
    """Raised when the Helmholtz system cannot be factorised."""


@dataclass(frozen=True, eq=False)
class Field:
    """Foliation-invariant function stored as values on the quotient nodes."""

    domain: WeightedDomain
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != (self.domain.size,):
            raise DomainMismatchError(f"expected {self.domain.size} nodal values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, domain: WeightedDomain, value: float) -> "Field":
        return cls(domain, np.full(domain.size, float(value)))

    @classmethod
    def from_function(cls, domain: WeightedDomain, function: Callable[[np.ndarray], np.ndarray]) -> "Field":
        return cls(domain, domain.sample(function))

    def _other(self, other: Any) -> np.ndarray:
        return nodal_values(self.domain, other)

    def __add__(self, other: Any) -> "Field":
        return Field(self.domain, self.values + self._other(other))

    def __sub__(self, other: Any) -> "Field":
        return Field(self.domain, self.values - self._other(other))

    def __mul__(self, scalar: float) -> "Field":
        return Field(self.domain, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.domain, -self.values)

    def positive_part(self) -> "Field":
        return Field(self.domain, np.maximum(self.values, 0.0))

    def negative_part(self) -> "Field":
        return Field(self.domain, np.minimum(self.values, 0.0))

    def to_list(self) -> list[float]:
        return self.values.tolist()


FieldLike = Union[Field, np.ndarray, float]


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Exponent, coefficients, flow parameter and coercivity constant of one problem."""

    p: float
    b: np.ndarray
    c: np.ndarray
    theta: float
    mu: float

    @property
    def b_is_constant(self) -> bool:
        return bool(float(np.max(self.b) - np.min(self.b)) <= 1e-12 * max(1.0, float(np.max(np.abs(self.b)))))

    @property
    def c_is_constant(self) -> bool:
        return bool(float(np.max(self.c) - np.min(self.c)) <= 1e-12 * float(np.max(self.c)))

    def describe(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "theta": self.theta,
            "mu": self.mu,
            "b": float(self.b[0]) if self.b_is_constant else "profile",
            "c": float(self.c[0]) if self.c_is_constant else "profile",
        }


def stiffness_matrix(domain: WeightedDomain) -> sparse.csr_matrix:
    """P1 stiffness with cell weight (w_i + w_{i+1})/2; cyclic on periodic domains."""

    cached = domain._cache.get("stiffness")
    if cached is not None:
        return cached
    size = domain.size
    if size == 1:
        matrix = sparse.csr_matrix((1, 1))
    else:
        left = np.arange(size if domain.is_periodic else size - 1)
        right = (left + 1) % size
        conductance = 0.5 * (domain.weights[left] + domain.weights[right]) / domain.spacing
        rows = np.concatenate([left, right, left, right])
        cols = np.concatenate([left, right, right, left])
        data = np.concatenate([conductance, conductance, -conductance, -conductance])
        matrix = sparse.csr_matrix(sparse.coo_matrix((data, (rows, cols)), shape=(size, size)))
    domain._cache["stiffness"] = matrix
    return matrix


def mass_matrix(domain: WeightedDomain) -> sparse.dia_matrix:
    return sparse.diags(domain.quadrature_weights)


def _pair(domain: WeightedDomain, u: FieldLike, v: FieldLike) -> tuple[np.ndarray, np.ndarray]:
    return nodal_values(domain, u), nodal_values(domain, v)


def dirichlet_form(domain: WeightedDomain, u: FieldLike, v: FieldLike) -> float:
    left, right = _pair(domain, u, v)
    return float(left @ (stiffness_matrix(domain) @ right))


def inner_h1(domain: WeightedDomain, u: FieldLike, v: FieldLike) -> float:
    left, right = _pair(domain, u, v)
    return dirichlet_form(domain, left, right) + float(np.dot(domain.quadrature_weights * left, right))


def quadratic_b(spec: ProblemSpec, domain: WeightedDomain, u: FieldLike, v: FieldLike) -> float:
    """The b-form without the coercivity guard."""

    left, right = _pair(domain, u, v)
    return dirichlet_form(domain, left, right) + float(np.dot(domain.quadrature_weights * spec.b * left, right))


def inner_b(spec: ProblemSpec, domain: WeightedDomain, u: FieldLike, v: FieldLike) -> float:
    if spec.mu <= 0.0:
        raise CoercivityError(f"b-form is not coercive (mu={spec.mu:.6g})")
    return quadratic_b(spec, domain, u, v)


def inner_theta(spec: ProblemSpec, domain: WeightedDomain, u: FieldLike, v: FieldLike) -> float:
    left, right = _pair(domain, u, v)
    return dirichlet_form(domain, left, right) + spec.theta * float(np.dot(domain.quadrature_weights * left, right))


def norm_theta(spec: ProblemSpec, domain: WeightedDomain, u: FieldLike) -> float:
    return math.sqrt(max(inner_theta(spec, domain, u, u), 0.0))


def norm_cp(spec: ProblemSpec, domain: WeightedDomain, u: FieldLike) -> float:
    values = nodal_values(domain, u)
    return float(np.dot(domain.quadrature_weights * spec.c, np.abs(values) ** spec.p)) ** (1.0 / spec.p)


def _helmholtz_factor(domain: WeightedDomain, theta: float) -> sparse_linalg.SuperLU:
    key = ("helmholtz", float(theta))
    factor = domain._cache.get(key)
    if factor is None:
        system = (stiffness_matrix(domain) + theta * mass_matrix(domain)).tocsc()
        try:
            factor = sparse_linalg.splu(system)
        except RuntimeError as exc:
            raise SingularSystemError(f"Helmholtz system with theta={theta:.6g} is singular: {exc}") from exc
        domain._cache[key] = factor
        LOGGER.debug("Factorised Helmholtz system for %s with theta=%.6g", domain.name, theta)
    return factor


def helmholtz_solve(spec: ProblemSpec, domain: WeightedDomain, f: FieldLike) -> Field:
    """Riesz representative v of f: inner_theta(v, phi) = integrate(f * phi) for every nodal phi."""

    if spec.theta <= 0.0:
        raise SingularSystemError(f"theta must be positive, got {spec.theta}")
    rhs = domain.quadrature_weights * nodal_values(domain, f)
    solution = _helmholtz_factor(domain, spec.theta).solve(rhs)
    if not np.all(np.isfinite(solution)):
        raise SingularSystemError("Helmholtz solve produced non-finite values; check the domain weights")
    return Field(domain, solution)


def _b_form_matrices(domain: WeightedDomain, b: np.ndarray) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
    stiffness = stiffness_matrix(domain)
    weights = domain.quadrature_weights
    return (stiffness + sparse.diags(weights * b)).tocsr(), (stiffness + sparse.diags(weights)).tocsr()


def _mu_for(domain: WeightedDomain, b: np.ndarray) -> float:
    form_b, form_h1 = _b_form_matrices(domain, b)
    if domain.size <= DENSE_EIGEN_LIMIT:
        values = linalg.eigh(form_b.toarray(), form_h1.toarray(), eigvals_only=True, subset_by_index=[0, 0])
        return float(values[0])
    shift = min(1.0, float(np.min(b))) - 1.0
    try:
        values = sparse_linalg.eigsh(
            form_b.tocsc(), k=1, M=form_h1.tocsc(), sigma=shift, which="LM", tol=EIGEN_TOLERANCE, return_eigenvectors=False
        )
    except sparse_linalg.ArpackNoConvergence as exc:
        raise CoercivityError("Generalised eigenvalue iteration for mu did not converge") from exc
    return float(np.min(values))


def estimate_mu(spec: ProblemSpec, domain: WeightedDomain) -> float:
    """Largest mu with <u,u>_b >= mu <u,u>_H1 for every nodal u."""

    return _mu_for(domain, spec.b)


def coercivity_lower_bound(b: FieldLike) -> float:
    """min{1, inf b}; a valid (not always optimal) coercivity constant for b > 0."""

    return min(1.0, float(np.min(getattr(b, "values", b))))


def first_invariant_eigenvalue(domain: WeightedDomain) -> float:
    """Smallest positive eigenvalue of the weighted Laplacian on the quotient."""

    if domain.size < 3:
        raise ValueError("domain too small for an eigenvalue estimate")
    stiffness = stiffness_matrix(domain)
    mass = mass_matrix(domain)
    shifted = (stiffness + mass).tocsc()
    # eigenvalues of (M, K + M) are 1/(1 + lambda); lambda = 0 gives the top one
    if domain.size <= DENSE_EIGEN_LIMIT:
        values = linalg.eigh(
            mass.toarray(), shifted.toarray(), eigvals_only=True, subset_by_index=[domain.size - 2, domain.size - 1]
        )
    else:
        values = sparse_linalg.eigsh(mass.tocsc(), k=2, M=shifted, which="LA", tol=EIGEN_TOLERANCE, return_eigenvectors=False)
    second = float(np.sort(values)[-2])
    return 1.0 / second - 1.0


def smooth_random_field(domain: WeightedDomain, rng: np.random.Generator, modes: int = 6) -> Field:
    """Random low-mode cosine series (Fourier series on periodic domains) with decaying amplitudes."""

    s = (domain.nodes - domain.nodes[0]) / domain.length
    values = np.zeros(domain.size)
    for k in range(modes + 1):
        amplitude = 1.0 / (1.0 + k) ** 2
        if domain.is_periodic:
            values += amplitude * (rng.standard_normal() * np.cos(2 * math.pi * k * s) + rng.standard_normal() * np.sin(2 * math.pi * k * s))
        else:
            values += amplitude * rng.standard_normal() * np.cos(math.pi * k * s)
    return Field(domain, values)


def critical_sobolev_exponent(m: int) -> float:
    return math.inf if m <= 2 else 2.0 * m / (m - 2)


def _scalar_curvature(domain: WeightedDomain) -> float:
    preset_id = domain.meta.get("preset") or domain.meta.get("analytic_weight")
    if not preset_id:
        raise ProblemSpecError(f"domain {domain.name!r} has no known scalar curvature")
    try:
        curvature = get_preset(str(preset_id)).scalar_curvature
    except (PresetNotFoundError, ValueError) as exc:
        raise ProblemSpecError(f"cannot resolve scalar curvature of {preset_id!r}: {exc}") from exc
    if curvature is None:
        raise ProblemSpecError(f"preset {preset_id!r} does not record its scalar curvature")
    return curvature


def _coefficient(domain: WeightedDomain, value: Coefficient, name: str) -> np.ndarray:
    if isinstance(value, str):
        profile = value.strip().casefold()
        m = domain.ambient_dim
        if profile == "yamabe":
            constant = (m - 2) / (4.0 * (m - 1)) * _scalar_curvature(domain)
        elif profile == "scalar-curvature":
            constant = _scalar_curvature(domain)
        else:
            raise ProblemSpecError(f"unknown profile {value!r} for {name}; expected 'yamabe' or 'scalar-curvature'")
        array = np.full(domain.size, constant)
    elif callable(value):
        array = np.asarray(value(domain.nodes), dtype=float) * np.ones(domain.size)
    elif np.isscalar(value):
        array = np.full(domain.size, float(value))
    else:
        array = np.asarray(value, dtype=float)
    if array.shape != (domain.size,):
        raise ProblemSpecError(f"{name} has shape {array.shape}, expected ({domain.size},)")
    if not np.all(np.isfinite(array)):
        raise ProblemSpecError(f"{name} must be finite")
    return array


def build_problem(
    domain: WeightedDomain,
    p: float | str,
    b: Coefficient = 1.0,
    c: Coefficient = 1.0,
    theta: float | None = None,
) -> ProblemSpec:
    """Validate exponent and coefficients, compute mu and choose theta."""

    critical = critical_sobolev_exponent(domain.ambient_dim)
    if isinstance(p, str):
        if p.strip().casefold() != "yamabe" or math.isinf(critical):
            raise ProblemSpecError(f"unknown exponent {p!r}; 'yamabe' needs ambient dimension >= 3")
        p = critical
    p = float(p)
    if not p > 2.0:
        raise ProblemSpecError(f"exponent must satisfy p > 2, got p={p}")
    if p > critical * (1.0 + 1e-12):
        raise ProblemSpecError(f"exponent must satisfy p <= 2*_m = {critical:.6g}, got p={p}")
    if math.isclose(p, critical):
        LOGGER.warning("p = 2*_m = %.6g is critical; convergence relies on foliated compactness", critical)
    b_values = _coefficient(domain, b, "b")
    c_values = _coefficient(domain, c, "c")
    if np.any(c_values <= 0.0):
        raise ProblemSpecError("coefficient c must be positive at every node")
    mu = _mu_for(domain, b_values)
    if mu <= 0.0:
        raise CoercivityError(f"b-form is not coercive (mu={mu:.6g})")
    bound = max(1.0, mu)
    b_max = float(np.max(np.abs(b_values)))
    if theta is None:
        theta = THETA_MARGIN * max(bound, b_max)
    theta = float(theta)
    if not theta > bound or theta < b_max:
        raise ProblemSpecError(f"theta must satisfy theta > max(1, mu) = {bound:.6g} and theta >= max|b| = {b_max:.6g}")
    LOGGER.debug("Built problem p=%.6g mu=%.10g theta=%.6g on %s", p, mu, theta, domain.name)
    return ProblemSpec(p=p, b=b_values, c=c_values, theta=theta, mu=mu)


__all__ = [
    "CoercivityError",
    "Field",
    "FieldLike",
    "ProblemSpec",
    "ProblemSpecError",
    "SingularSystemError",
    "build_problem",
    "coercivity_lower_bound",
    "critical_sobolev_exponent",
    "dirichlet_form",
    "estimate_mu",
    "first_invariant_eigenvalue",
    "helmholtz_solve",
    "inner_b",
    "inner_h1",
    "inner_theta",
    "mass_matrix",
    "norm_cp",
    "norm_theta",
    "quadratic_b",
    "smooth_random_field",
    "stiffness_matrix",
]
