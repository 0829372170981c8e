"""Independent checks: strong residuals, ambient-grid criticality, embedding ratios and a shooting oracle."""

from __future__ import annotations

from dataclasses import dataclass
import logging
import math
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy import integrate, interpolate, optimize

from .discrete import Field, FieldLike, ProblemSpec, inner_h1, smooth_random_field, stiffness_matrix
from .presets import EndpointKind, FoliationPreset, get_preset
from .quotient import WeightedDomain, make_preset, nodal_values

LOGGER = logging.getLogger(__name__)

SHOOT_OFFSET = 1e-6
SCAN_RTOL = 1e-8
REFINE_RTOL = 1e-11
PROBE_CELLS = 8
BOUNDED_DRIFT = 0.05
PHASE_SAMPLES = 256
BRACKET_XTOL = 1e-14
BRACKET_RTOL = 4 * np.finfo(float).eps


class OracleError(RuntimeError):
    """Raised when the shooting scan finds no bracket for the requested node count."""


class VerificationInputError(ValueError):
    """Raised when a check receives inputs outside its domain of validity."""


def strong_residual(spec: ProblemSpec, domain: WeightedDomain, u: FieldLike) -> float:
    """max over interior nodes of |-(w u')'/w + b u - c|u|^(p-2) u|."""

    values = nodal_values(domain, u)
    weights = domain.quadrature_weights
    mask = domain.interior & (weights > 0.0)
    if not np.any(mask):
        return 0.0
    laplacian = (stiffness_matrix(domain) @ values)[mask] / weights[mask]
    local = values[mask]
    source = spec.c[mask] * np.sign(local) * np.abs(local) ** (spec.p - 1.0)
    return float(np.max(np.abs(laplacian + spec.b[mask] * local - source)))


@dataclass(frozen=True, eq=False)
class AmbientGrid:
    """Tensor grid (t along the quotient, s along the leaves) of a two-dimensional ambient model."""

    kind: str
    t_nodes: np.ndarray
    s_nodes: np.ndarray
    density: np.ndarray
    leaf_metric: np.ndarray
    quotient: WeightedDomain

    @property
    def ds(self) -> float:
        return 2.0 * math.pi / self.s_nodes.size

    @property
    def shape(self) -> tuple[int, int]:
        return self.t_nodes.size, self.s_nodes.size

    def lift(self, u: FieldLike, source: WeightedDomain) -> np.ndarray:
        """Interpolate a quotient field onto the grid's t-nodes (constant along leaves)."""

        return _spline(source, nodal_values(source, u))(self.t_nodes)


def torus_grid(n_t: int, n_s: int) -> AmbientGrid:
    quotient = make_preset("torus-factor", n_t)
    return AmbientGrid(
        kind="torus",
        t_nodes=quotient.nodes,
        s_nodes=np.arange(n_s) * (2.0 * math.pi / n_s),
        density=np.ones(quotient.size),
        leaf_metric=np.ones(quotient.size),
        quotient=quotient,
    )


def sphere_grid(n_t: int, n_s: int) -> AmbientGrid:
    """S^2 in polar coordinates; t is the polar angle and the poles are singular leaves."""

    quotient = make_preset("suspension-sphere(2)", n_t)
    density = quotient.weights / (2.0 * math.pi)
    metric = np.zeros(quotient.size)
    regular = density > 0.0
    metric[regular] = 1.0 / density[regular] ** 2
    return AmbientGrid(
        kind="sphere",
        t_nodes=quotient.nodes,
        s_nodes=np.arange(n_s) * (2.0 * math.pi / n_s),
        density=density,
        leaf_metric=metric,
        quotient=quotient,
    )


def _spline(domain: WeightedDomain, values: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    if domain.is_periodic:
        nodes = np.append(domain.nodes, domain.nodes[0] + domain.length)
        spline = interpolate.CubicSpline(nodes, np.append(values, values[0]), bc_type="periodic")
        start = domain.nodes[0]
        return lambda t: spline(start + np.mod(np.asarray(t) - start, domain.length))

    def condition(kind: EndpointKind) -> Any:
        return (1, 0.0) if kind is EndpointKind.SINGULAR_LEAF else (2, 0.0)

    spline = interpolate.CubicSpline(domain.nodes, values, bc_type=(condition(domain.start_kind), condition(domain.end_kind)))
    return spline


def _grid_forms(grid: AmbientGrid, left: np.ndarray, right: np.ndarray) -> tuple[float, float]:
    """Discrete Dirichlet and L^2 pairings of two grid functions (shape n_t x n_s)."""

    quotient = grid.quotient
    h = quotient.spacing
    mass = quotient.quadrature_weights / (2.0 * math.pi)
    if quotient.is_periodic:
        d_left = np.roll(left, -1, axis=0) - left
        d_right = np.roll(right, -1, axis=0) - right
        cell_density = 0.5 * (grid.density + np.roll(grid.density, -1))
    else:
        d_left = np.diff(left, axis=0)
        d_right = np.diff(right, axis=0)
        cell_density = 0.5 * (grid.density[:-1] + grid.density[1:])
    along_t = float(np.sum(cell_density[:, None] * d_left * d_right)) / h * grid.ds
    s_left = np.roll(left, -1, axis=1) - left
    s_right = np.roll(right, -1, axis=1) - right
    along_s = float(np.sum((mass * grid.leaf_metric)[:, None] * s_left * s_right)) / grid.ds
    l2 = float(np.sum(mass[:, None] * left * right)) * grid.ds
    return along_t + along_s, l2


def _test_functions(grid: AmbientGrid, rng: np.random.Generator, invariant: bool, degree: int = 3) -> np.ndarray:
    t = grid.t_nodes[:, None]
    s = grid.s_nodes[None, :]
    values = np.zeros(grid.shape)
    if grid.kind == "torus":
        leaf_modes = range(1) if invariant else range(degree + 1)
        for j in range(degree + 1):
            for k in leaf_modes:
                phase = rng.uniform(0.0, 2.0 * math.pi)
                values = values + rng.standard_normal() * np.cos(j * t + k * s + phase)
        return values
    x, y, z = np.sin(t) * np.cos(s), np.sin(t) * np.sin(s), np.cos(t) * np.ones_like(s)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            for c in range(degree + 1 - a - b):
                if invariant and (a or b):
                    continue
                values = values + rng.standard_normal() * x**a * y**b * z**c
    return values


def symmetric_criticality_check(
    spec: ProblemSpec,
    solution: Any,
    grid: AmbientGrid,
    n_tests: int = 100,
    *,
    seed: int = 0,
    invariant: bool = False,
) -> float:
    """max |J'(U) V| over random unit test functions V on the ambient grid, U the lifted solution."""

    if getattr(solution, "converged", True) is False:
        raise VerificationInputError("symmetric criticality needs a converged solution")
    field = getattr(solution, "field", solution)
    source = field.domain
    if source.is_periodic != grid.quotient.is_periodic or not math.isclose(source.length, grid.quotient.length):
        raise VerificationInputError(f"solution on {source.name!r} does not live on the {grid.kind} grid")
    lifted = grid.lift(field, source)
    b = grid.lift(spec.b, source)
    c = grid.lift(spec.c, source)
    reaction = b * lifted - c * np.sign(lifted) * np.abs(lifted) ** (spec.p - 1.0)
    u_grid = np.repeat(lifted[:, None], grid.s_nodes.size, axis=1)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_tests):
        test = _test_functions(grid, rng, invariant)
        dirichlet, l2 = _grid_forms(grid, test, test)
        norm = math.sqrt(dirichlet + l2)
        if norm == 0.0:
            continue
        gradient_part, _ = _grid_forms(grid, u_grid, test)
        _, reaction_part = _grid_forms(grid, np.repeat(reaction[:, None], grid.s_nodes.size, axis=1), test)
        worst = max(worst, abs(gradient_part + reaction_part) / norm)
    LOGGER.debug("Symmetric criticality on %s grid %s: %.3e", grid.kind, grid.shape, worst)
    return worst


def leaf_orthogonality(grid: AmbientGrid, u: np.ndarray, v: np.ndarray) -> float:
    """L^2 pairing of an invariant u with v minus its leaf average."""

    u_grid = np.asarray(u, dtype=float)
    if u_grid.ndim == 1:
        u_grid = np.repeat(u_grid[:, None], grid.s_nodes.size, axis=1)
    v_grid = np.asarray(v, dtype=float)
    oscillation = v_grid - v_grid.mean(axis=1, keepdims=True)
    return _grid_forms(grid, u_grid, oscillation)[1]


def critical_exponent(s: float, m: int, kappa: int, *, allow_fixed_points: bool = False) -> float:
    """Largest p for which invariant H^{1,s} functions embed continuously into L^p."""

    lowest = 0 if allow_fixed_points else 1
    if s < 1 or m < 1 or not lowest <= kappa < m:
        raise VerificationInputError(f"need s >= 1 and {lowest} <= kappa < m; got s={s}, m={m}, kappa={kappa}")
    gap = m - kappa
    if s >= gap:
        return math.inf
    return s * gap / (gap - s)


@dataclass(frozen=True)
class EmbeddingTable:
    p: float
    resolutions: tuple[int, ...]
    ratios: tuple[float, ...]
    drift: float
    trend: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "resolutions": list(self.resolutions),
            "ratios": list(self.ratios),
            "drift": self.drift,
            "trend": self.trend,
        }


def _probes(domain: WeightedDomain) -> list[np.ndarray]:
    width = PROBE_CELLS * domain.spacing
    probes = []
    if domain.start_kind is EndpointKind.SINGULAR_LEAF:
        probes.append(np.maximum(0.0, 1.0 - (domain.nodes - domain.nodes[0]) / width) ** 2)
    if domain.end_kind is EndpointKind.SINGULAR_LEAF:
        probes.append(np.maximum(0.0, 1.0 - (domain.nodes[-1] - domain.nodes) / width) ** 2)
    return probes


def embedding_ratio(
    domain_factory: Callable[[int], WeightedDomain],
    p: float,
    n_samples: int,
    resolutions: Sequence[int],
    *,
    seed: int = 0,
    concentrate: bool = False,
    modes: int = 6,
) -> EmbeddingTable:
    """sup |u|_{L^p} / |u|_{H^1} over random fields at each resolution."""

    if p < 1:
        raise VerificationInputError("p must be at least 1")
    if len(resolutions) < 2:
        raise VerificationInputError("embedding_ratio needs at least two resolutions")
    ratios = []
    for resolution in resolutions:
        domain = domain_factory(resolution)
        rng = np.random.default_rng(seed)
        candidates = [smooth_random_field(domain, rng, modes).values for _ in range(n_samples)]
        if concentrate:
            candidates.extend(_probes(domain))
        best = 0.0
        for values in candidates:
            lp = float(np.dot(domain.quadrature_weights, np.abs(values) ** p)) ** (1.0 / p)
            h1 = math.sqrt(inner_h1(domain, values, values))
            if h1 > 0.0:
                best = max(best, lp / h1)
        ratios.append(best)
        LOGGER.debug("Embedding ratio p=%.3g at resolution %d: %.6g", p, resolution, best)
    drift = abs(ratios[-1] - ratios[-2]) / ratios[-2]
    growing = all(later > earlier for earlier, later in zip(ratios, ratios[1:]))
    trend = "unbounded-trend" if growing and drift > BOUNDED_DRIFT else "bounded"
    return EmbeddingTable(p=p, resolutions=tuple(resolutions), ratios=tuple(ratios), drift=drift, trend=trend)


@dataclass(frozen=True, eq=False)
class OracleSolution:
    s: float
    nodes: int
    field: Field
    profile: Callable[[np.ndarray], np.ndarray]


def _coefficient_function(value: Any) -> Callable[[float], float]:
    if callable(value):
        return lambda t: float(value(t))
    constant = float(value)
    return lambda t: constant


def _log_derivative(preset: FoliationPreset) -> Callable[[float], float]:
    if preset.log_derivative is not None:
        return lambda t: float(preset.log_derivative(t))
    step = 1e-6

    def numeric(t: float) -> float:
        lower, upper = max(t - step, 0.5 * t), min(t + step, t + 0.5 * (preset.length - t))
        values = preset.weight(np.array([lower, t, upper]))
        return float((values[2] - values[0]) / ((upper - lower) * values[1]))

    return numeric


class _Shooter:
    def __init__(self, preset: FoliationPreset, params: Mapping[str, Any]) -> None:
        self.preset = preset
        self.p = float(params["p"])
        self.b = _coefficient_function(params.get("b", preset.default_b))
        self.c = _coefficient_function(params.get("c", preset.default_c))
        self.log_derivative = _log_derivative(preset)
        if preset.is_periodic:
            self.start, self.stop = 0.0, 0.5 * preset.length
            self.order = 0
        else:
            self.start, self.stop = SHOOT_OFFSET, preset.length - SHOOT_OFFSET
            self.order = round(SHOOT_OFFSET * self.log_derivative(SHOOT_OFFSET))

    def reaction(self, t: float, u: float) -> float:
        return self.b(t) * u - self.c(t) * math.copysign(abs(u) ** (self.p - 1.0), u)

    def rhs(self, t: float, y: np.ndarray) -> list[float]:
        slope = 0.0 if self.preset.is_periodic else self.log_derivative(t) * y[1]
        return [y[1], self.reaction(t, y[0]) - slope]

    def initial(self, s: float) -> list[float]:
        if self.preset.is_periodic:
            return [s, 0.0]
        curvature = self.reaction(0.0, s) / (self.order + 1.0)
        return [s + 0.5 * curvature * self.start**2, curvature * self.start]

    def integrate(self, s: float, rtol: float, dense: bool = False) -> Any:
        def crossing(t: float, y: np.ndarray) -> float:
            return y[0]

        return integrate.solve_ivp(
            self.rhs,
            (self.start, self.stop),
            self.initial(s),
            method="RK45",
            rtol=rtol,
            atol=rtol * 1e-2,
            events=crossing,
            dense_output=dense,
        )

    def flux(self, s: float, rtol: float = SCAN_RTOL) -> tuple[float, int]:
        result = self.integrate(s, rtol)
        slope = float(result.y[1, -1])
        weight = float(self.preset.weight(np.array([self.stop]))[0])
        return weight * slope, len(result.t_events[0])

    def node_count(self, zeros: int) -> int:
        return 2 * zeros if self.preset.is_periodic else zeros


def _profile(shooter: _Shooter, s: float) -> Callable[[np.ndarray], np.ndarray]:
    result = shooter.integrate(s, REFINE_RTOL, dense=True)
    dense = result.sol
    start_curvature = shooter.reaction(0.0, s) / (shooter.order + 1.0)
    end_value, end_slope = float(result.y[0, -1]), float(result.y[1, -1])
    preset = shooter.preset

    def evaluate(t: np.ndarray) -> np.ndarray:
        points = np.atleast_1d(np.asarray(t, dtype=float))
        if preset.is_periodic:
            points = np.mod(points, preset.length)
            points = np.where(points > shooter.stop, preset.length - points, points)
        inside = np.clip(points, shooter.start, shooter.stop)
        values = dense(inside)[0]
        if not preset.is_periodic:
            before = points < shooter.start
            values = np.where(before, s + 0.5 * start_curvature * points**2, values)
            after = points > shooter.stop
            values = np.where(after, end_value + end_slope * (points - shooter.stop), values)
        return values

    return evaluate


def shooting_oracle(
    preset: str | FoliationPreset,
    spec_params: Mapping[str, Any],
    target_nodes: int,
    s_range: tuple[float, float],
    *,
    resolution: int = 512,
    n_scan: int = 200,
) -> list[OracleSolution]:
    """Shoot from t = 0 with u(0) = s, u'(0) = 0 and keep the roots of the terminal flux."""

    preset = preset if isinstance(preset, FoliationPreset) else get_preset(preset)
    if target_nodes < 0:
        raise VerificationInputError("target_nodes must be nonnegative")
    if preset.is_periodic and target_nodes % 2:
        raise VerificationInputError("periodic profiles have an even number of sign changes")
    lower, upper = s_range
    if not 0.0 < lower < upper:
        raise VerificationInputError("s_range must be an interval of positive amplitudes")
    shooter = _Shooter(preset, spec_params)
    amplitudes = np.linspace(lower, upper, n_scan)
    scan = [shooter.flux(float(s)) for s in amplitudes]
    domain = make_preset(preset, resolution)
    solutions: list[OracleSolution] = []

    def refined_flux(s: float) -> float:
        return shooter.flux(s, REFINE_RTOL)[0]

    for index in range(n_scan - 1):
        (left_flux, _), (right_flux, _) = scan[index], scan[index + 1]
        if left_flux == 0.0:
            root = float(amplitudes[index])
        elif left_flux * right_flux < 0.0:
            left, right = float(amplitudes[index]), float(amplitudes[index + 1])
            if refined_flux(left) * refined_flux(right) > 0.0:
                LOGGER.debug("Bracket [%.6g, %.6g] lost its sign change at tight tolerance", left, right)
                continue
            root = optimize.brentq(refined_flux, left, right, xtol=BRACKET_XTOL, rtol=BRACKET_RTOL)
        else:
            continue
        zeros = shooter.flux(root, REFINE_RTOL)[1]
        if shooter.node_count(zeros) != target_nodes:
            continue
        profile = _profile(shooter, root)
        solutions.append(OracleSolution(root, target_nodes, Field(domain, profile(domain.nodes)), profile))
        LOGGER.info("Shooting root s=%.12g with %d sign changes on %s", root, target_nodes, preset.preset_id)
    if not solutions:
        raise OracleError(f"no shooting solution with {target_nodes} sign changes in s-range {s_range}")
    return solutions


def oracle_distance(record_field: Field, oracle: OracleSolution) -> float:
    """Sup-norm distance after sign and, on periodic domains, phase alignment."""

    domain = record_field.domain
    values = record_field.values
    t = domain.nodes

    def distance(sign: float, shift: float) -> float:
        return float(np.max(np.abs(values - sign * oracle.profile(t - shift))))

    best = math.inf
    for sign in (1.0, -1.0):
        if not domain.is_periodic:
            best = min(best, distance(sign, 0.0))
            continue
        shifts = np.linspace(0.0, domain.length, PHASE_SAMPLES, endpoint=False)
        coarse = [distance(sign, shift) for shift in shifts]
        centre = float(shifts[int(np.argmin(coarse))])
        width = domain.length / PHASE_SAMPLES
        refined = optimize.minimize_scalar(
            lambda shift: distance(sign, shift),
            bounds=(centre - width, centre + width),
            method="bounded",
            options={"xatol": 1e-10},
        )
        best = min(best, min(coarse), float(refined.fun))
    return best


__all__ = [
    "AmbientGrid",
    "EmbeddingTable",
    "OracleError",
    "OracleSolution",
    "VerificationInputError",
    "critical_exponent",
    "embedding_ratio",
    "leaf_orthogonality",
    "oracle_distance",
    "shooting_oracle",
    "sphere_grid",
    "strong_residual",
    "symmetric_criticality_check",
    "torus_grid",
]
