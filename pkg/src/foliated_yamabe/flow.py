"""Theta-gradient flow, seeds and the least-energy / sign-changing search drivers."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from enum import Enum
import logging
import math
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from .discrete import (
    Field,
    FieldLike,
    ProblemSpec,
    build_problem,
    norm_cp,
    norm_theta,
    smooth_random_field,
    stiffness_matrix,
)
from .energy import (
    NehariPoint,
    ProjectionError,
    constant_solution,
    energy,
    gradient_theta,
    nehari_residual,
    project_nehari,
    project_nodal_nehari,
    sign_changes,
)
from .quotient import DomainError, WeightedDomain, nodal_values
from .verify import strong_residual

LOGGER = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
ROUNDOFF_FACTOR = 64.0
ENERGY_DUPLICATE_RTOL = 1e-7
GRADIENT_FLOOR_FACTOR = 16.0
POLISH_HALVINGS = 8
JITTER_AMPLITUDE = 0.25

Projector = Callable[[ProblemSpec, WeightedDomain, FieldLike], NehariPoint]
Monitor = Callable[["FlowStep"], None]


class LineSearchError(RuntimeError):
    """Raised when backtracking cannot find an energy-decreasing step."""


class ConvergenceError(RuntimeError):
    """Raised when the flow does not reach tol_grad; carries the partial record."""

    def __init__(self, message: str, record: "SolutionRecord | None" = None) -> None:
        super().__init__(message)
        self.record = record


class ConeTrappingError(RuntimeError):
    """Raised when a trajectory seeded in the nonnegative cone leaves its neighbourhood."""

    def __init__(self, message: str, negative_norm: float = 0.0, iteration: int = 0) -> None:
        super().__init__(message)
        self.negative_norm = negative_norm
        self.iteration = iteration


@dataclass(frozen=True)
class FlowConfig:
    step: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 40
    tol_grad: float = 1e-10
    max_iters: int = 3000
    cone_radius: float = 1e-8
    dedup_fraction: float = 1e-3
    restarts: int = 5
    random_modes: int = 6
    polish: bool = True
    polish_threshold: float = 1e-5
    polish_max_iters: int = 20

    def __post_init__(self) -> None:
        if not self.tol_grad > 0.0:
            raise ValueError("tol_grad must be positive")
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError("backtrack must lie in (0, 1)")
        if not self.cone_radius > 0.0:
            raise ValueError("cone_radius must be positive")
        if not self.step > 0.0 or not 0.0 < self.armijo < 1.0:
            raise ValueError("step must be positive and armijo must lie in (0, 1)")
        if self.max_iters < 1 or self.max_backtracks < 0 or self.restarts < 0:
            raise ValueError("max_iters must be positive; max_backtracks and restarts nonnegative")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FlowConfig":
        unknown = set(data) - {item.name for item in fields(cls)}
        if unknown:
            raise ValueError(f"Unknown flow settings: {', '.join(sorted(unknown))}")
        defaults = cls()
        values = {name: type(getattr(defaults, name))(value) for name, value in data.items()}
        return cls(**values)


@dataclass(frozen=True, eq=False)
class FlowStep:
    field: Field
    energy: float
    step: float
    grad_norm: float
    terminal: bool
    backtracks: int = 0


class SignClass(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    SIGN_CHANGING = "sign-changing"


@dataclass(frozen=True, eq=False)
class SolutionRecord:
    field: Field
    energy: float
    grad_norm: float
    nehari_residual: float
    strong_residual: float
    nodal_count: int
    sign_class: SignClass
    seed: str
    iters: int
    converged: bool = True

    @property
    def domain(self) -> WeightedDomain:
        return self.field.domain

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "domain": self.domain.name,
            "field": self.field.to_list(),
            "energy": self.energy,
            "grad_norm": self.grad_norm,
            "nehari_residual": self.nehari_residual,
            "strong_residual": self.strong_residual,
            "nodal_count": self.nodal_count,
            "sign_class": self.sign_class.value,
            "seed": self.seed,
            "iters": self.iters,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], domain: WeightedDomain) -> "SolutionRecord":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"Unsupported solution schema_version: {data.get('schema_version')!r}")
        required = {"field", "energy", "grad_norm", "nehari_residual", "strong_residual", "nodal_count", "sign_class", "seed", "iters"}
        missing = required - set(data)
        if missing:
            raise ValueError(f"Solution document missing required fields: {', '.join(sorted(missing))}")
        record = cls(
            field=Field(domain, np.asarray(data["field"], dtype=float)),
            energy=float(data["energy"]),
            grad_norm=float(data["grad_norm"]),
            nehari_residual=float(data["nehari_residual"]),
            strong_residual=float(data["strong_residual"]),
            nodal_count=int(data["nodal_count"]),
            sign_class=SignClass(data["sign_class"]),
            seed=str(data["seed"]),
            iters=int(data["iters"]),
            converged=bool(data.get("converged", True)),
        )
        if (record.nodal_count == 0) != (record.sign_class is not SignClass.SIGN_CHANGING):
            raise ValueError("sign_class is inconsistent with nodal_count")
        return record


def make_record(
    spec: ProblemSpec,
    domain: WeightedDomain,
    u: FieldLike,
    *,
    grad_norm: float,
    seed: str,
    iters: int,
    converged: bool,
) -> SolutionRecord:
    field = u if isinstance(u, Field) else Field(domain, nodal_values(domain, u))
    nodes = sign_changes(domain, field)
    if nodes:
        sign_class = SignClass.SIGN_CHANGING
    else:
        sign_class = SignClass.POSITIVE if float(np.sum(field.values)) >= 0.0 else SignClass.NEGATIVE
    return SolutionRecord(
        field=field,
        energy=energy(spec, domain, field),
        grad_norm=grad_norm,
        nehari_residual=nehari_residual(spec, domain, field),
        strong_residual=strong_residual(spec, domain, field),
        nodal_count=nodes,
        sign_class=sign_class,
        seed=seed,
        iters=iters,
        converged=bool(converged),
    )


def gradient_floor(spec: ProblemSpec, domain: WeightedDomain, u: FieldLike) -> float:
    """Round-off level of |grad J(u)|_theta on this mesh.

    The Helmholtz solve amplifies round-off by about cond(K + theta M),
    which grows like 1/h^2.
    """

    weights = domain.quadrature_weights
    active = weights > 0.0
    if not np.any(active):
        return 0.0
    diagonal = stiffness_matrix(domain).diagonal()
    condition = 1.0 + float(np.max(diagonal[active] / (spec.theta * weights[active])))
    return GRADIENT_FLOOR_FACTOR * np.finfo(float).eps * condition * norm_theta(spec, domain, u)


def flow_step(
    spec: ProblemSpec,
    domain: WeightedDomain,
    u: FieldLike,
    config: FlowConfig,
    project: Projector | None = None,
) -> FlowStep:
    """One Armijo-backtracked step of u <- P(u - eta grad J(u))."""

    values = nodal_values(domain, u)
    gradient = gradient_theta(spec, domain, values).values
    grad_norm = norm_theta(spec, domain, gradient)
    current = energy(spec, domain, values)
    if grad_norm <= max(config.tol_grad, gradient_floor(spec, domain, values)):
        return FlowStep(Field(domain, values), current, 0.0, grad_norm, True)
    floor = ROUNDOFF_FACTOR * np.finfo(float).eps * max(1.0, abs(current))
    eta = config.step
    for attempt in range(config.max_backtracks + 1):
        trial = values - eta * gradient
        try:
            if project is not None:
                trial = project(spec, domain, trial).field.values
        except ProjectionError as exc:
            LOGGER.debug("Projection failed at eta=%.3e: %s", eta, exc)
            eta *= config.backtrack
            continue
        trial_energy = energy(spec, domain, trial)
        predicted = config.armijo * eta * grad_norm**2
        if predicted > floor:
            accepted = trial_energy <= current - predicted
        else:
            # energy differences are below round-off; fall back to the gradient norm
            trial_norm = norm_theta(spec, domain, gradient_theta(spec, domain, trial).values)
            accepted = trial_norm < grad_norm and trial_energy <= current + floor
        if accepted:
            return FlowStep(Field(domain, trial), trial_energy, eta, grad_norm, False, attempt)
        LOGGER.debug("Backtracking: eta=%.3e energy %.15g -> %.15g", eta, current, trial_energy)
        eta *= config.backtrack
    raise LineSearchError(
        f"no decreasing step after {config.max_backtracks} backtracks (|grad J|_theta={grad_norm:.3e})"
    )


def _phase_direction(domain: WeightedDomain, values: np.ndarray) -> np.ndarray:
    derivative = (np.roll(values, -1) - np.roll(values, 1)) / (2.0 * domain.spacing)
    return domain.quadrature_weights * derivative


def polish_critical_point(
    spec: ProblemSpec,
    domain: WeightedDomain,
    u: FieldLike,
    config: FlowConfig,
) -> tuple[Field, float]:
    """Damped Newton iteration on the discrete Euler-Lagrange system.

    Iterates are kept only while |grad J|_theta strictly decreases; each
    Newton step is halved up to ``POLISH_HALVINGS`` times. Periodic
    domains border the Jacobian with a phase condition against the
    translation mode.
    """

    values = np.array(nodal_values(domain, u), dtype=float)
    best = norm_theta(spec, domain, gradient_theta(spec, domain, values).values)
    stiffness = stiffness_matrix(domain)
    weights = domain.quadrature_weights
    target = max(config.tol_grad, gradient_floor(spec, domain, values))
    for iteration in range(config.polish_max_iters):
        if best <= target:
            break
        magnitude = np.abs(values)
        residual = stiffness @ values + weights * (spec.b * values - spec.c * np.sign(values) * magnitude ** (spec.p - 1.0))
        jacobian = stiffness + sparse.diags(weights * (spec.b - (spec.p - 1.0) * spec.c * magnitude ** (spec.p - 2.0)))
        rhs = residual
        if domain.is_periodic:
            phase = _phase_direction(domain, values)
            if np.linalg.norm(phase) > 1e-12 * max(1.0, float(np.max(magnitude))):
                border = sparse.csr_matrix(phase[:, None])
                jacobian = sparse.bmat([[jacobian, border], [border.T, None]])
                rhs = np.append(residual, 0.0)
        try:
            delta = sparse_linalg.splu(sparse.csc_matrix(jacobian)).solve(rhs)[: domain.size]
        except RuntimeError as exc:
            LOGGER.debug("Newton polish stopped: %s", exc)
            break
        if not np.all(np.isfinite(delta)):
            break
        damping = 1.0
        for _ in range(POLISH_HALVINGS + 1):
            candidate = values - damping * delta
            candidate_norm = norm_theta(spec, domain, gradient_theta(spec, domain, candidate).values)
            if candidate_norm < best:
                break
            damping *= 0.5
        else:
            break
        LOGGER.debug("Newton polish %d: |grad J|_theta %.3e -> %.3e (damping %g)", iteration, best, candidate_norm, damping)
        values, best = candidate, candidate_norm
    return Field(domain, values), best


def _interior_indices(domain: WeightedDomain) -> np.ndarray:
    return np.flatnonzero(domain.interior & (domain.weights > 0.0))


def seed_bumps(domain: WeightedDomain, k: int) -> list[Field]:
    """k cos^2 bumps centred on consecutive node groups; neighbouring supports are two zero nodes apart."""

    if k < 1:
        raise ValueError("k must be at least 1")
    interior = _interior_indices(domain)
    if interior.size < 4 * k:
        raise DomainError(f"domain has {interior.size} interior nodes; {4 * k} are needed for {k} bumps")
    bumps = []
    for group in np.array_split(interior, k):
        values = np.zeros(domain.size)
        s = np.linspace(-0.5, 0.5, group.size)
        values[group] = np.cos(math.pi * s) ** 2
        values[group[[0, -1]]] = 0.0
        bumps.append(Field(domain, values))
    return bumps


def _pattern_signs(pattern: str | Sequence[int]) -> list[int]:
    if isinstance(pattern, str):
        mapping = {"+": 1, "-": -1}
        try:
            return [mapping[symbol] for symbol in pattern]
        except KeyError as exc:
            raise ValueError(f"pattern symbols must be '+' or '-', got {pattern!r}") from exc
    signs = [int(item) for item in pattern]
    if any(sign not in (1, -1) for sign in signs):
        raise ValueError("pattern entries must be +1 or -1")
    return signs


def seed_sign_changing(spec: ProblemSpec, domain: WeightedDomain, pattern: str | Sequence[int]) -> Field:
    """Sum of sign_i * sigma(bump_i); every signed piece lies on the Nehari manifold."""

    signs = _pattern_signs(pattern)
    if len(signs) < 2:
        raise ValueError("sign-changing seeds need a pattern of length >= 2")
    values = np.zeros(domain.size)
    for sign, bump in zip(signs, seed_bumps(domain, len(signs))):
        values += sign * project_nehari(spec, domain, bump).field.values
    return Field(domain, values)


def random_positive_seed(domain: WeightedDomain, rng: np.random.Generator, modes: int = 6) -> Field:
    return Field(domain, np.exp(0.5 * smooth_random_field(domain, rng, modes).values))


def negative_part_norm(spec: ProblemSpec, domain: WeightedDomain, u: FieldLike) -> tuple[float, float]:
    """(|u^-|_theta, |u^-|_{c,p}): upper and Sobolev-lower sides of the distance to the positive cone."""

    negative = np.minimum(nodal_values(domain, u), 0.0)
    return norm_theta(spec, domain, negative), norm_cp(spec, domain, negative)


def _polish_keeping_shape(
    spec: ProblemSpec,
    domain: WeightedDomain,
    current: Field,
    config: FlowConfig,
    expected_nodes: int,
    cone_limit: float | None,
) -> tuple[Field, float] | None:
    polished, polished_norm = polish_critical_point(spec, domain, current, config)
    if sign_changes(domain, polished) != expected_nodes:
        return None
    if cone_limit is not None and negative_part_norm(spec, domain, polished)[0] > cone_limit:
        return None
    return polished, polished_norm


def _settle(
    spec: ProblemSpec,
    domain: WeightedDomain,
    current: Field,
    config: FlowConfig,
    label: str,
    iters: int,
    expected_nodes: int,
    cone_limit: float | None,
    reason: str,
) -> SolutionRecord:
    """Final Newton polish, then converged iff |grad J|_theta reaches tol_grad or the round-off floor."""

    grad_norm = norm_theta(spec, domain, gradient_theta(spec, domain, current).values)
    if config.polish and grad_norm > config.tol_grad:
        polished = _polish_keeping_shape(spec, domain, current, config, expected_nodes, cone_limit)
        if polished is not None and polished[1] < grad_norm:
            current, grad_norm = polished
    tolerance = max(config.tol_grad, gradient_floor(spec, domain, current))
    converged = grad_norm <= tolerance
    record = make_record(spec, domain, current, grad_norm=grad_norm, seed=label, iters=iters, converged=converged)
    if not converged:
        raise ConvergenceError(f"seed {label} {reason} at |grad J|_theta={grad_norm:.3e} (tolerance {tolerance:.3e})", record)
    LOGGER.info("Seed %s converged after %d iterations (|grad J|_theta=%.3e)", label, iters, grad_norm)
    return record


def _descend(
    spec: ProblemSpec,
    domain: WeightedDomain,
    seed_field: FieldLike,
    config: FlowConfig,
    project: Projector,
    label: str,
    *,
    cone_limit: float | None = None,
    monitor: Monitor | None = None,
) -> SolutionRecord:
    current = project(spec, domain, seed_field).field
    expected_nodes = sign_changes(domain, current)
    last_polish = math.inf
    for iteration in range(config.max_iters):
        try:
            step = flow_step(spec, domain, current, config, project)
        except LineSearchError as exc:
            LOGGER.debug("Seed %s stalled: %s", label, exc)
            return _settle(spec, domain, current, config, label, iteration, expected_nodes, cone_limit, "stalled")
        if step.terminal:
            return _settle(spec, domain, current, config, label, iteration, expected_nodes, cone_limit, "stopped")
        if monitor is not None:
            monitor(step)
        current = step.field
        if cone_limit is not None:
            negative = negative_part_norm(spec, domain, current)[0]
            if negative > cone_limit:
                raise ConeTrappingError(
                    f"seed {label} left the positive cone: |u^-|_theta={negative:.3e} > {cone_limit:.3e}",
                    negative,
                    iteration,
                )
        grad_norm = step.grad_norm
        if config.polish and grad_norm <= config.polish_threshold and grad_norm < 0.1 * last_polish:
            last_polish = grad_norm
            polished = _polish_keeping_shape(spec, domain, current, config, expected_nodes, cone_limit)
            if polished is not None and polished[1] < grad_norm:
                current = polished[0]
                if polished[1] <= max(config.tol_grad, gradient_floor(spec, domain, current)):
                    return _settle(spec, domain, current, config, label, iteration + 1, expected_nodes, cone_limit, "stopped")
    return _settle(
        spec, domain, current, config, label, config.max_iters, expected_nodes, cone_limit, f"did not converge in {config.max_iters} iterations"
    )


def _least_energy_seeds(spec: ProblemSpec, domain: WeightedDomain, config: FlowConfig, seed: int) -> Iterable[tuple[str, Field]]:
    try:
        yield "bump", seed_bumps(domain, 1)[0]
    except DomainError as exc:
        LOGGER.debug("No bump seed: %s", exc)
    if spec.b_is_constant and spec.c_is_constant and spec.b[0] > 0.0:
        yield "constant", constant_solution(spec, domain)
    rng = np.random.default_rng(seed)
    for index in range(config.restarts):
        yield f"random:{seed}:{index}", random_positive_seed(domain, rng, config.random_modes)


def _improves(record: SolutionRecord, best: SolutionRecord) -> bool:
    """Lower energy wins; within round-off the smaller gradient wins."""

    floor = ROUNDOFF_FACTOR * np.finfo(float).eps * max(1.0, abs(best.energy))
    if abs(record.energy - best.energy) <= floor:
        return record.grad_norm < best.grad_norm
    return record.energy < best.energy


def find_least_energy(
    spec: ProblemSpec,
    domain: WeightedDomain,
    config: FlowConfig | None = None,
    *,
    seed: int = 0,
    monitor: Monitor | None = None,
) -> SolutionRecord:
    """Minimise J over the Nehari manifold from positive seeds; keep the lowest converged energy."""

    config = config or FlowConfig()
    best: SolutionRecord | None = None
    partial: SolutionRecord | None = None
    for label, start in _least_energy_seeds(spec, domain, config, seed):
        cone_limit = negative_part_norm(spec, domain, start)[0] + config.cone_radius
        try:
            record = _descend(spec, domain, start, config, project_nehari, label, cone_limit=cone_limit, monitor=monitor)
        except ConvergenceError as exc:
            LOGGER.warning("%s", exc)
            if exc.record is not None and (partial is None or exc.record.grad_norm < partial.grad_norm):
                partial = exc.record
            continue
        LOGGER.debug("Seed %s reached energy %.15g", label, record.energy)
        if best is None or _improves(record, best):
            best = record
    if best is None:
        raise ConvergenceError("no positive seed converged", partial)
    if best.sign_class is SignClass.NEGATIVE:
        best = make_record(spec, domain, -best.field, grad_norm=best.grad_norm, seed=best.seed, iters=best.iters, converged=True)
    LOGGER.info("Least energy %.15g from seed %s", best.energy, best.seed)
    return best


def _l2_norm(domain: WeightedDomain, values: np.ndarray) -> float:
    return math.sqrt(float(np.dot(domain.quadrature_weights, values**2)))


def is_duplicate(candidate: SolutionRecord, existing: SolutionRecord, fraction: float) -> bool:
    """Same solution up to the sign symmetry u -> -u (or the same nodal count at equal energy)."""

    domain = existing.domain
    scale = _l2_norm(domain, existing.field.values)
    distance = min(
        _l2_norm(domain, candidate.field.values - existing.field.values),
        _l2_norm(domain, candidate.field.values + existing.field.values),
    )
    if distance <= fraction * scale:
        return True
    same_level = abs(candidate.energy - existing.energy) <= ENERGY_DUPLICATE_RTOL * abs(existing.energy)
    return candidate.nodal_count == existing.nodal_count and same_level


def sign_patterns(k: int, sign: int = 1, *, periodic: bool = False) -> list[list[int]]:
    """k - 1 alternating patterns starting with ``sign``.

    Interval patterns have 1 ... k-1 sign changes. Periodic patterns have even
    length 2, 4, ..., 2(k-1) so that they alternate around the circle too.
    """

    lengths = range(2, 2 * k - 1, 2) if periodic else range(2, k + 1)
    return [[sign * (-1) ** index for index in range(length)] for length in lengths]


def _jittered(domain: WeightedDomain, start: Field, rng: np.random.Generator, modes: int) -> Field:
    """Positive smooth modulation of ``start``; supports and signs are unchanged."""

    return Field(domain, start.values * np.exp(JITTER_AMPLITUDE * smooth_random_field(domain, rng, modes).values))


def find_sign_changing(
    spec: ProblemSpec,
    domain: WeightedDomain,
    k: int,
    config: FlowConfig | None = None,
    *,
    seed: int = 0,
    sign: int = 1,
    monitor: Monitor | None = None,
) -> list[SolutionRecord]:
    """Flow alternating-sign seeds under the nodal Nehari projection; keep distinct critical points.

    A pattern whose seed fails or collapses is retried up to ``config.restarts``
    times from randomly modulated copies drawn from ``seed``.
    """

    if k < 2:
        raise ValueError("find_sign_changing needs k >= 2")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    config = config or FlowConfig()
    rng = np.random.default_rng(seed)
    records: list[SolutionRecord] = []
    for pattern in sign_patterns(k, sign, periodic=domain.is_periodic):
        base = "pattern:" + "".join("+" if item > 0 else "-" for item in pattern)
        try:
            start = seed_sign_changing(spec, domain, pattern)
        except DomainError as exc:
            LOGGER.warning("Skipping %s: %s", base, exc)
            continue
        for attempt in range(config.restarts + 1):
            label = base if attempt == 0 else f"{base}:random:{seed}:{attempt}"
            trial = start if attempt == 0 else _jittered(domain, start, rng, config.random_modes)
            try:
                record = _descend(spec, domain, trial, config, project_nodal_nehari, label, monitor=monitor)
            except (ConvergenceError, ProjectionError) as exc:
                LOGGER.warning("Seed %s did not converge: %s", label, exc)
                continue
            if record.sign_class is not SignClass.SIGN_CHANGING:
                LOGGER.warning("Seed %s collapsed to a %s solution; dropped", label, record.sign_class.value)
                continue
            duplicate = next((item for item in records if is_duplicate(record, item, config.dedup_fraction)), None)
            if duplicate is not None:
                LOGGER.warning("Seed %s reproduced the solution from %s; dropped", label, duplicate.seed)
                break
            records.append(record)
            break
    records.sort(key=lambda item: item.energy)
    if len(records) < k - 1:
        LOGGER.warning("Found %d distinct sign-changing solutions; %d requested", len(records), k - 1)
    return records


def find_solutions(
    spec: ProblemSpec,
    domain: WeightedDomain,
    k: int,
    config: FlowConfig | None = None,
    *,
    seed: int = 0,
    positive_only: bool = False,
) -> list[SolutionRecord]:
    """Least-energy record followed by up to k-1 sign-changing records, sorted by energy."""

    if k < 1:
        raise ValueError("k must be at least 1")
    least = find_least_energy(spec, domain, config, seed=seed)
    if positive_only or k == 1:
        return [least]
    records = [least] + find_sign_changing(spec, domain, k, config, seed=seed)
    return sorted(records, key=lambda item: item.energy)


def discrete_sobolev_constant(spec: ProblemSpec, domain: WeightedDomain, config: FlowConfig | None = None) -> float:
    """sup |u|_{c,p} / |u|_theta, read off the least energy of the problem with b = theta."""

    theta_spec = build_problem(domain, spec.p, b=spec.theta, c=spec.c, theta=spec.theta)
    tau = find_least_energy(theta_spec, domain, config).energy
    level = 2.0 * spec.p * tau / (spec.p - 2.0)
    return level ** ((2.0 - spec.p) / (2.0 * spec.p))


def sign_changing_gap_threshold(
    spec: ProblemSpec,
    domain: WeightedDomain,
    tau: float,
    config: FlowConfig | None = None,
) -> float:
    """Lower bound for |u^+|_theta and |u^-|_theta at sign-changing critical points."""

    constant = discrete_sobolev_constant(spec, domain, config)
    return (2.0 * spec.p * tau / (spec.p - 2.0)) ** (1.0 / spec.p) / constant


__all__ = [
    "ConeTrappingError",
    "ConvergenceError",
    "FlowConfig",
    "FlowStep",
    "LineSearchError",
    "SignClass",
    "SolutionRecord",
    "discrete_sobolev_constant",
    "find_least_energy",
    "find_sign_changing",
    "find_solutions",
    "flow_step",
    "gradient_floor",
    "is_duplicate",
    "make_record",
    "negative_part_norm",
    "polish_critical_point",
    "random_positive_seed",
    "seed_bumps",
    "seed_sign_changing",
    "sign_changing_gap_threshold",
    "sign_patterns",
]
