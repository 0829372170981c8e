"""Energy functional, theta-gradient and Nehari projections."""

from __future__ import annotations

from dataclasses import dataclass
import logging

import numpy as np

from .discrete import (
    Field,
    FieldLike,
    ProblemSpec,
    ProblemSpecError,
    helmholtz_solve,
    quadratic_b,
    stiffness_matrix,
)
from .quotient import WeightedDomain, nodal_values

LOGGER = logging.getLogger(__name__)

NEWTON_TOLERANCE = 1e-13
NEWTON_MAX_ITERS = 60
COMPONENT_FLOOR = 1e-3
ZERO_FRACTION = 1e-12


class ProjectionError(ValueError):
    """Raised when a field cannot be projected onto the Nehari manifold."""

    def __init__(self, message: str, b_norm: float = 0.0, cp_norm: float = 0.0) -> None:
        super().__init__(message)
        self.b_norm = b_norm
        self.cp_norm = cp_norm


@dataclass(frozen=True, eq=False)
class NehariPoint:
    field: Field
    energy: float
    nehari_residual: float
    scale: float = 1.0


def nonlinearity(spec: ProblemSpec, domain: WeightedDomain, u: FieldLike) -> Field:
    """c |u|^(p-2) u, written as c sign(u)|u|^(p-1) so it stays finite at zero."""

    values = nodal_values(domain, u)
    return Field(domain, spec.c * np.sign(values) * np.abs(values) ** (spec.p - 1.0))


def _power_integral(spec: ProblemSpec, domain: WeightedDomain, values: np.ndarray) -> float:
    return float(np.dot(domain.quadrature_weights * spec.c, np.abs(values) ** spec.p))


def energy(spec: ProblemSpec, domain: WeightedDomain, u: FieldLike) -> float:
    values = nodal_values(domain, u)
    return 0.5 * quadratic_b(spec, domain, values, values) - _power_integral(spec, domain, values) / spec.p


def derivative(spec: ProblemSpec, domain: WeightedDomain, u: FieldLike, v: FieldLike) -> float:
    """J'(u)v = <u, v>_b - integral of c|u|^(p-2) u v."""

    left = nodal_values(domain, u)
    right = nodal_values(domain, v)
    source = nonlinearity(spec, domain, left).values
    return quadratic_b(spec, domain, left, right) - float(np.dot(domain.quadrature_weights * source, right))


def apply_L(spec: ProblemSpec, domain: WeightedDomain, u: FieldLike) -> Field:
    values = nodal_values(domain, u)
    return helmholtz_solve(spec, domain, (spec.theta - spec.b) * values)


def apply_G(spec: ProblemSpec, domain: WeightedDomain, u: FieldLike) -> Field:
    return helmholtz_solve(spec, domain, nonlinearity(spec, domain, u))


def gradient_theta(spec: ProblemSpec, domain: WeightedDomain, u: FieldLike) -> Field:
    """u - Lu - Gu, computed with a single Helmholtz solve."""

    values = nodal_values(domain, u)
    source = (spec.theta - spec.b) * values + nonlinearity(spec, domain, values).values
    return Field(domain, values - helmholtz_solve(spec, domain, source).values)


def _norms(spec: ProblemSpec, domain: WeightedDomain, values: np.ndarray) -> tuple[float, float]:
    return quadratic_b(spec, domain, values, values), _power_integral(spec, domain, values)


def nehari_scale(spec: ProblemSpec, domain: WeightedDomain, u: FieldLike) -> float:
    """t_u = (|u|_b^2 / |u|_{c,p}^p)^(1/(p-2))."""

    b_norm, cp_norm = _norms(spec, domain, nodal_values(domain, u))
    if cp_norm <= 0.0 or b_norm <= 0.0:
        raise ProjectionError("cannot project the zero field onto the Nehari manifold", b_norm, cp_norm)
    return (b_norm / cp_norm) ** (1.0 / (spec.p - 2.0))


def nehari_residual(spec: ProblemSpec, domain: WeightedDomain, u: FieldLike) -> float:
    """Relative mismatch |(|u|_b^2 - |u|_{c,p}^p)| / max of the two."""

    b_norm, cp_norm = _norms(spec, domain, nodal_values(domain, u))
    scale = max(abs(b_norm), cp_norm)
    if scale == 0.0:
        return 0.0
    return abs(b_norm - cp_norm) / scale


def _point(spec: ProblemSpec, domain: WeightedDomain, values: np.ndarray, scale: float) -> NehariPoint:
    field = Field(domain, values)
    return NehariPoint(
        field=field,
        energy=energy(spec, domain, field),
        nehari_residual=nehari_residual(spec, domain, field),
        scale=scale,
    )


def project_nehari(spec: ProblemSpec, domain: WeightedDomain, u: FieldLike) -> NehariPoint:
    values = nodal_values(domain, u)
    scale = nehari_scale(spec, domain, values)
    return _point(spec, domain, scale * values, scale)


def constant_solution(spec: ProblemSpec, domain: WeightedDomain) -> Field:
    """u* = (b/c)^(1/(p-2)) for constant positive b and c."""

    if not (spec.b_is_constant and spec.c_is_constant):
        raise ProblemSpecError("the constant solution needs constant b and c")
    b0 = float(spec.b[0])
    if b0 <= 0.0:
        raise ProblemSpecError("the constant solution needs b > 0")
    return Field.constant(domain, (b0 / float(spec.c[0])) ** (1.0 / (spec.p - 2.0)))


def vetois_constant(spec: ProblemSpec) -> float:
    """(theta - mu)/(theta + mu)."""

    return (spec.theta - spec.mu) / (spec.theta + spec.mu)


def l_operator_bound(spec: ProblemSpec) -> float:
    """(theta - mu)/theta; bounds |L|_theta for every nodal field once theta >= max|b|."""

    return (spec.theta - spec.mu) / spec.theta


def _sign_runs(domain: WeightedDomain, values: np.ndarray) -> list[np.ndarray]:
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    if peak == 0.0:
        return []
    signs = np.where(np.abs(values) > ZERO_FRACTION * peak, np.sign(values), 0.0)
    breaks = np.flatnonzero(np.diff(signs) != 0.0) + 1
    starts = np.concatenate([[0], breaks])
    ends = np.concatenate([breaks, [signs.size]])
    runs = [np.arange(start, end) for start, end in zip(starts, ends) if signs[start] != 0.0]
    if domain.is_periodic and len(runs) > 1:
        first, last = runs[0], runs[-1]
        if first[0] == 0 and last[-1] == signs.size - 1 and signs[first[0]] == signs[last[-1]]:
            runs = [np.concatenate([last, first])] + runs[1:-1]
    return runs


def nodal_components(domain: WeightedDomain, u: FieldLike) -> list[np.ndarray]:
    """Index sets of the maximal runs of constant strict sign, wrapping on periodic domains."""

    return _sign_runs(domain, nodal_values(domain, u))


def sign_changes(domain: WeightedDomain, u: FieldLike) -> int:
    """Number of sign changes, counted cyclically on periodic domains."""

    values = nodal_values(domain, u)
    signs = [float(np.sign(values[run[0]])) for run in _sign_runs(domain, values)]
    if len(signs) <= 1:
        return 0
    if domain.is_periodic:
        signs.append(signs[0])
    return sum(left != right for left, right in zip(signs, signs[1:]))


def project_nodal_nehari(spec: ProblemSpec, domain: WeightedDomain, u: FieldLike) -> NehariPoint:
    """Rescale every nodal component by s_j > 0 so that J'(u) u_j = 0 for each j.

    Components whose peak is below ``COMPONENT_FLOOR`` of the global peak are
    left unscaled.
    """

    values = nodal_values(domain, u)
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    runs = [run for run in _sign_runs(domain, values) if np.max(np.abs(values[run])) > COMPONENT_FLOOR * peak]
    if not runs:
        raise ProjectionError("cannot project the zero field onto the Nehari manifold")
    pieces = np.zeros((len(runs), values.size))
    for row, run in enumerate(runs):
        pieces[row, run] = values[run]
    stiffness = stiffness_matrix(domain)
    mass_b = domain.quadrature_weights * spec.b
    gram = pieces @ (stiffness @ pieces.T) + (pieces * mass_b) @ pieces.T
    powers = np.array([_power_integral(spec, domain, piece) for piece in pieces])
    rest = values - pieces.sum(axis=0)
    if len(runs) == 1 and not np.any(rest):
        return project_nehari(spec, domain, values)
    # coupling of the unscaled remainder with each component
    offset = pieces @ (stiffness @ rest) + (pieces * mass_b) @ rest
    exponent = spec.p - 2.0

    scales = (np.diag(gram) / powers) ** (1.0 / exponent)
    converged = False
    for iteration in range(NEWTON_MAX_ITERS):
        residual = gram @ scales + offset - powers * scales ** (spec.p - 1.0)
        if np.max(np.abs(residual)) <= NEWTON_TOLERANCE * np.max(np.diag(gram) * scales):
            converged = True
            break
        jacobian = gram - np.diag((spec.p - 1.0) * powers * scales**exponent)
        try:
            update = np.linalg.solve(jacobian, residual)
        except np.linalg.LinAlgError as exc:
            raise ProjectionError(f"nodal Nehari system is singular: {exc}") from exc
        step = 1.0
        while np.any(scales - step * update <= 0.0):
            step *= 0.5
        scales = scales - step * update
        LOGGER.debug("Nodal Nehari Newton iteration %d: residual %.3e", iteration, float(np.max(np.abs(residual))))
    if not converged:
        raise ProjectionError(f"nodal Nehari projection did not converge for {len(runs)} components")
    projected = rest + scales @ pieces
    return _point(spec, domain, projected, float(np.exp(np.mean(np.log(scales)))))


__all__ = [
    "NehariPoint",
    "ProjectionError",
    "apply_G",
    "apply_L",
    "constant_solution",
    "derivative",
    "energy",
    "gradient_theta",
    "l_operator_bound",
    "nehari_residual",
    "nehari_scale",
    "nodal_components",
    "nonlinearity",
    "project_nehari",
    "project_nodal_nehari",
    "sign_changes",
    "vetois_constant",
]
