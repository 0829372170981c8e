"""Batch front-end: solve, verify, build Clifford quotients and list presets."""

from __future__ import annotations

import argparse
from dataclasses import dataclass, field, fields, replace
import json
from json import JSONDecodeError
import logging
import math
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .artifacts import SolutionSet, read_solutions, write_json_document, write_plot_data, write_solutions, write_summary_csv
from .clifford import (
    DegenerateFoliationError,
    UnsupportedCliffordError,
    build_clifford_system,
    fkm_quotient_domain,
    fkm_value,
    pi_rho,
)
from .discrete import (
    CoercivityError,
    ProblemSpec,
    ProblemSpecError,
    build_problem,
    critical_sobolev_exponent,
    norm_theta,
    smooth_random_field,
)
from .energy import apply_L, l_operator_bound, nehari_residual, project_nehari, project_nodal_nehari, vetois_constant
from .flow import ConvergenceError, FlowConfig, SolutionRecord, find_solutions, seed_bumps
from .presets import PresetNotFoundError, get_preset, list_presets
from .quotient import MIN_RESOLUTION, DomainError, WeightedDomain, make_preset, read_domain, uniform_sphere_sampler, write_domain
from .reports import VerificationCheck, VerificationReport, check_below, format_report
from .verify import (
    BOUNDED_DRIFT,
    OracleError,
    VerificationInputError,
    critical_exponent,
    embedding_ratio,
    oracle_distance,
    shooting_oracle,
    sphere_grid,
    symmetric_criticality_check,
    torus_grid,
)

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_VERIFICATION = 4

SUITES = ("projection", "nehari", "vetois", "embedding", "symmetric-criticality", "oracle")
SOLUTION_SUITES = {"projection", "nehari", "symmetric-criticality", "oracle"}
PROFILES = {"yamabe", "scalar-curvature"}

PROJECTION_TOLERANCE = 1e-6
NEHARI_TOLERANCE = 1e-8
VETOIS_SAMPLES = 20
SYMMETRY_GRIDS = (64, 128)
SYMMETRY_REFINEMENT = 3.5
SYMMETRY_DISCRIMINATION = 100.0
ORACLE_SCAN = 60


class ConfigError(ValueError):
    """Raised when a run configuration violates one of its constraints."""


@dataclass(frozen=True)
class RunConfig:
    preset: str = "suspension-sphere(2)"
    resolution: int = 512
    p: float | str = 4.0
    b: float | str = 1.0
    c: float | str = 1.0
    theta: float | None = None
    k: int = 1
    seed: int = 0
    positive_only: bool = False
    out: Path = Path("results")
    domain_file: Path | None = None
    flow: FlowConfig = field(default_factory=FlowConfig)
    checks: tuple[str, ...] = SUITES
    oracle_tolerance: float = 1e-4
    embedding_samples: int = 50

    def __post_init__(self) -> None:
        if isinstance(self.p, str):
            if self.p.strip().casefold() != "yamabe":
                raise ConfigError(f"p must be a number or 'yamabe', got {self.p!r}")
        elif not float(self.p) > 2.0:
            raise ConfigError(f"p must satisfy p > 2, got p={self.p}")
        if self.resolution < MIN_RESOLUTION:
            raise ConfigError(f"resolution must be at least {MIN_RESOLUTION}, got {self.resolution}")
        if self.k < 1:
            raise ConfigError(f"k must be at least 1, got {self.k}")
        for name in ("b", "c"):
            value = getattr(self, name)
            if isinstance(value, str) and value.strip().casefold() not in PROFILES:
                raise ConfigError(f"{name} must be a number or one of {sorted(PROFILES)}, got {value!r}")
        if not isinstance(self.c, str) and not float(self.c) > 0.0:
            raise ConfigError(f"c must satisfy c > 0, got c={self.c}")
        unknown = set(self.checks) - set(SUITES)
        if unknown:
            raise ConfigError(f"Unknown verification suites: {', '.join(sorted(unknown))}")
        if not self.oracle_tolerance > 0.0 or self.embedding_samples < 1:
            raise ConfigError("oracle_tolerance must be positive and embedding_samples at least 1")
        if self.domain_file is None:
            try:
                get_preset(self.preset)
            except (PresetNotFoundError, ValueError) as exc:
                raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict[str, Any]:
        return {
            "preset": self.preset,
            "resolution": self.resolution,
            "p": self.p,
            "b": self.b,
            "c": self.c,
            "theta": self.theta,
            "k": self.k,
            "seed": self.seed,
            "positive_only": self.positive_only,
            "out": str(self.out),
            "domain_file": None if self.domain_file is None else str(self.domain_file),
            "flow": self.flow.to_dict(),
            "checks": list(self.checks),
            "oracle_tolerance": self.oracle_tolerance,
            "embedding_samples": self.embedding_samples,
        }


_CONFIG_KEYS = {item.name for item in fields(RunConfig)}


def _number_or_profile(value: Any, name: str) -> float | str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number or a profile name")
    return float(value)


def _resolve_path(base: Path, value: str) -> Path:
    candidate = Path(value)
    if not candidate.is_absolute():
        candidate = base / candidate
    return candidate.resolve()


def _config_from_mapping(contents: Mapping[str, Any], base: Path) -> RunConfig:
    unknown = set(contents) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"Unknown configuration keys: {', '.join(sorted(unknown))}")
    values: dict[str, Any] = {}
    if "preset" in contents:
        values["preset"] = str(contents["preset"])
    try:
        for key in ("resolution", "k", "seed", "embedding_samples"):
            if key in contents:
                values[key] = int(contents[key])
        for key in ("p", "b", "c"):
            if key in contents:
                values[key] = _number_or_profile(contents[key], key)
        if contents.get("theta") is not None:
            values["theta"] = float(contents["theta"])
        if "oracle_tolerance" in contents:
            values["oracle_tolerance"] = float(contents["oracle_tolerance"])
        if "positive_only" in contents:
            values["positive_only"] = bool(contents["positive_only"])
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Invalid configuration value: {exc}") from exc
    if "out" in contents:
        values["out"] = _resolve_path(base, str(contents["out"]))
    if contents.get("domain_file"):
        values["domain_file"] = _resolve_path(base, str(contents["domain_file"]))
    if "flow" in contents:
        if not isinstance(contents["flow"], dict):
            raise ConfigError("'flow' entry in configuration must be a mapping")
        try:
            values["flow"] = FlowConfig.from_dict(contents["flow"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"Invalid flow settings: {exc}") from exc
    if "checks" in contents:
        if not isinstance(contents["checks"], list):
            raise ConfigError("'checks' entry in configuration must be a list")
        values["checks"] = tuple(str(item) for item in contents["checks"])
    return RunConfig(**values)


def _load_config(path: Path) -> RunConfig:
    try:
        raw_contents = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot read configuration file {path}: {exc}") from exc
    stripped = raw_contents.strip()
    if not stripped:
        raise ConfigError("Configuration file is empty")
    try:
        contents = json.loads(stripped)
    except JSONDecodeError as exc:
        raise ConfigError(f"Invalid JSON configuration: {path}") from exc
    if not isinstance(contents, dict):
        raise ConfigError("Configuration must be a JSON object")
    return _config_from_mapping(contents, path.parent)


def _load_domain(config: RunConfig) -> WeightedDomain:
    if config.domain_file is not None:
        return read_domain(config.domain_file)
    return make_preset(config.preset, config.resolution)


def _build_spec(config: RunConfig, domain: WeightedDomain) -> ProblemSpec:
    return build_problem(domain, config.p, b=config.b, c=config.c, theta=config.theta)


def _configured_exponent(config: RunConfig, domain: WeightedDomain) -> float:
    """Exponent of the run without the subcritical check; embedding trends also cover p above 2*_m."""

    return critical_sobolev_exponent(domain.ambient_dim) if isinstance(config.p, str) else float(config.p)


def cmd_solve(config: RunConfig) -> int:
    """Run the solver and write solutions.json, summary.csv and per-solution plot data."""

    domain = _load_domain(config)
    spec = _build_spec(config, domain)
    expected = 1 if config.positive_only else config.k
    LOGGER.info("Solving on %s (%d nodes) with %s", domain.name, domain.size, spec.describe())
    status = EXIT_OK
    try:
        records = find_solutions(spec, domain, config.k, config.flow, seed=config.seed, positive_only=config.positive_only)
    except ConvergenceError as exc:
        LOGGER.error("%s", exc)
        records = [exc.record] if exc.record is not None else []
        status = EXIT_CONVERGENCE
    if status == EXIT_OK and len(records) < expected:
        LOGGER.error("Found %d of %d requested solutions", len(records), expected)
        status = EXIT_CONVERGENCE
    positive = [record for record in records if record.nodal_count == 0 and record.converged]
    if positive:
        LOGGER.info("Least energy tau = %.15g", positive[0].energy)
    _write_run(config, domain, spec, records)
    return status


def _write_run(config: RunConfig, domain: WeightedDomain, spec: ProblemSpec, records: Sequence[SolutionRecord]) -> None:
    out = Path(config.out)
    plots = out / "plots"
    plots.mkdir(parents=True, exist_ok=True)
    ordered = sorted(records, key=lambda item: item.energy)
    write_solutions(domain, spec, ordered, out / "solutions.json", seed=config.seed, meta={"config": config.to_dict()})
    write_summary_csv(ordered, out / "summary.csv")
    for rank, record in enumerate(ordered):
        write_plot_data(record, plots / f"solution_{rank:02d}.dat")
    LOGGER.info("Wrote artifacts for %d record(s) to %s", len(ordered), out)


def _projection_checks(spec: ProblemSpec, domain: WeightedDomain, records: Sequence[SolutionRecord]) -> list[VerificationCheck]:
    checks = []
    for record in records:
        project = project_nodal_nehari if record.nodal_count else project_nehari
        scale = project(spec, domain, record.field).scale
        checks.append(check_below("projection", abs(scale - 1.0), PROJECTION_TOLERANCE, seed=record.seed, scale=scale))
    return checks


def _nehari_checks(records: Sequence[SolutionRecord], spec: ProblemSpec, domain: WeightedDomain) -> list[VerificationCheck]:
    return [
        check_below("nehari", nehari_residual(spec, domain, record.field), NEHARI_TOLERANCE, seed=record.seed)
        for record in records
    ]


def _vetois_checks(spec: ProblemSpec, domain: WeightedDomain, seed: int) -> list[VerificationCheck]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(VETOIS_SAMPLES):
        u = smooth_random_field(domain, rng)
        worst = max(worst, norm_theta(spec, domain, apply_L(spec, domain, u)) / norm_theta(spec, domain, u))
    inputs = {"theta": spec.theta, "mu": spec.mu, "samples": VETOIS_SAMPLES}
    bound = l_operator_bound(spec)
    literal = vetois_constant(spec)
    return [
        VerificationCheck("vetois", inputs, worst, bound, worst <= bound * (1.0 + 1e-12)),
        VerificationCheck(
            "vetois-constant",
            inputs,
            worst,
            literal,
            worst <= literal * (1.0 + 1e-12),
            informational=True,
            message="(theta - mu)/(theta + mu) is reported for reference",
        ),
    ]


def _preset_id(domain: WeightedDomain) -> str | None:
    value = domain.meta.get("preset")
    return str(value) if value else None


def _embedding_checks(p: float, domain: WeightedDomain, config: RunConfig) -> list[VerificationCheck]:
    preset_id = _preset_id(domain)
    if preset_id is None:
        return [VerificationCheck("embedding", {}, None, None, True, informational=True, message="skipped: needs a preset domain")]
    preset = get_preset(preset_id)
    exponent = critical_exponent(2, preset.ambient_dim, preset.kappa, allow_fixed_points=True)
    finest = max(config.resolution, 4 * MIN_RESOLUTION)
    resolutions = [finest // 4, finest // 2, finest]
    above = p > exponent
    table = embedding_ratio(
        lambda n: make_preset(preset_id, n), p, config.embedding_samples, resolutions, seed=config.seed, concentrate=above
    )
    return [
        VerificationCheck(
            "embedding",
            {"preset": preset_id, "p": p, "foliated_exponent": exponent, "resolutions": resolutions},
            table.drift,
            BOUNDED_DRIFT,
            table.trend == "bounded",
            informational=above,
            message=f"trend={table.trend}" + (" (p above the foliated exponent)" if above else ""),
        )
    ]


def _symmetry_checks(spec: ProblemSpec, domain: WeightedDomain, records: Sequence[SolutionRecord]) -> list[VerificationCheck]:
    preset_id = _preset_id(domain)
    factories = {get_preset("torus-factor").preset_id: torus_grid, get_preset("suspension-sphere(2)").preset_id: sphere_grid}
    factory = factories.get(preset_id or "")
    converged = [record for record in records if record.converged]
    if factory is None or not converged:
        return [
            VerificationCheck(
                "symmetric-criticality",
                {"domain": domain.name},
                None,
                None,
                True,
                informational=True,
                message="skipped: needs a converged solution on torus-factor or suspension-sphere(2)",
            )
        ]
    record = converged[0]
    coarse_grid, fine_grid = (factory(size, size) for size in SYMMETRY_GRIDS)
    coarse = symmetric_criticality_check(spec, record, coarse_grid)
    fine = symmetric_criticality_check(spec, record, fine_grid)
    bump = project_nehari(spec, domain, seed_bumps(domain, 1)[0]).field
    bump_score = symmetric_criticality_check(spec, bump, fine_grid)
    inputs = {"seed": record.seed, "grids": list(SYMMETRY_GRIDS), "coarse": coarse, "fine": fine}
    refinement = coarse / fine if fine > 0.0 else math.inf
    return [
        VerificationCheck("symmetric-criticality-refinement", inputs, refinement, SYMMETRY_REFINEMENT, refinement >= SYMMETRY_REFINEMENT),
        VerificationCheck(
            "symmetric-criticality-discrimination",
            {**inputs, "bump": bump_score},
            bump_score / fine if fine > 0.0 else math.inf,
            SYMMETRY_DISCRIMINATION,
            bump_score >= SYMMETRY_DISCRIMINATION * fine,
        ),
    ]


def _oracle_checks(spec: ProblemSpec, domain: WeightedDomain, records: Sequence[SolutionRecord], config: RunConfig) -> list[VerificationCheck]:
    preset_id = _preset_id(domain)
    if preset_id is None or not (spec.b_is_constant and spec.c_is_constant):
        return [VerificationCheck("oracle", {}, None, None, True, informational=True, message="skipped: needs a preset with constant b and c")]
    params = {"p": spec.p, "b": float(spec.b[0]), "c": float(spec.c[0])}
    checks = []
    for record in records:
        values = record.field.values
        reference = float(np.max(np.abs(values))) if domain.is_periodic else abs(float(values[0]))
        reference = max(reference, 1e-3)
        inputs = {"seed": record.seed, "nodal_count": record.nodal_count}
        try:
            oracles = shooting_oracle(
                preset_id,
                params,
                record.nodal_count,
                (0.5 * reference, 1.5 * reference),
                resolution=config.resolution,
                n_scan=ORACLE_SCAN,
            )
        except (OracleError, VerificationInputError) as exc:
            checks.append(VerificationCheck("oracle", inputs, None, config.oracle_tolerance, False, message=str(exc)))
            continue
        distance = min(oracle_distance(record.field, oracle) for oracle in oracles)
        checks.append(check_below("oracle", distance, config.oracle_tolerance, **inputs))
    return checks


def cmd_verify(config: RunConfig) -> int:
    """Run the selected suites and write report.json; nonzero exit lists failed checks."""

    out = Path(config.out)
    solutions_path = out / "solutions.json"
    solution_set: SolutionSet | None = None
    if solutions_path.exists():
        try:
            solution_set = read_solutions(solutions_path)
        except ValueError as exc:
            raise ConfigError(f"Cannot read {solutions_path}: {exc}") from exc
    needing = sorted(SOLUTION_SUITES.intersection(config.checks) - {"symmetric-criticality", "oracle"})
    if solution_set is None and needing:
        raise ConfigError(f"Suites {', '.join(needing)} need {solutions_path}; run 'solve' first")
    spec: ProblemSpec | None
    if solution_set is not None:
        domain, spec, records = solution_set.domain, solution_set.build_problem(), solution_set.records
    else:
        domain, records = _load_domain(config), []
        spec = _build_spec(config, domain) if set(config.checks) - {"embedding"} else None

    checks: list[VerificationCheck] = []
    for suite in config.checks:
        LOGGER.info("Running %s checks", suite)
        if suite == "projection":
            checks.extend(_projection_checks(spec, domain, records))
        elif suite == "nehari":
            checks.extend(_nehari_checks(records, spec, domain))
        elif suite == "vetois":
            checks.extend(_vetois_checks(spec, domain, config.seed))
        elif suite == "embedding":
            checks.extend(_embedding_checks(spec.p if spec is not None else _configured_exponent(config, domain), domain, config))
        elif suite == "symmetric-criticality":
            checks.extend(_symmetry_checks(spec, domain, records))
        elif suite == "oracle":
            checks.extend(_oracle_checks(spec, domain, records, config))
    report = VerificationReport.from_checks(checks)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    print(format_report(report))
    if report.overall_status == "fail":
        LOGGER.error("Failed checks: %s", ", ".join(sorted({check.check for check in report.failed})))
        return EXIT_VERIFICATION
    return EXIT_OK


def cmd_clifford(q: int, copies: int, bins: int, samples: int, out: Path, *, seed: int = 0) -> int:
    """Write system.json, relations.json and, for nondegenerate systems, quotient.json."""

    system = build_clifford_system(q, copies)
    out.mkdir(parents=True, exist_ok=True)
    write_json_document(system.to_dict(), out / "system.json")
    violations = system.check_relations()
    gram = np.einsum("ijk,lkj->il", system.stacked, system.stacked) / system.n
    orthonormal = bool(np.array_equal(gram, np.eye(q + 1)))
    points = uniform_sphere_sampler(system.n)(np.random.default_rng(seed), 10_000)
    radius = float(np.max(np.linalg.norm(np.atleast_2d(pi_rho(system, points)), axis=1)))
    values = np.atleast_1d(fkm_value(system, points))
    inputs = {"q": q, "copies": copies, "n": system.n}
    checks = [
        VerificationCheck("clifford-relations", inputs, len(violations), 0, not violations),
        VerificationCheck("clifford-orthonormality", inputs, orthonormal, True, orthonormal),
        check_below("pi-rho-radius", radius, 1.0 + 1e-12, **inputs),
        check_below("fkm-range", float(np.max(np.abs(values))), 1.0 + 1e-12, **inputs),
    ]
    report = VerificationReport.from_checks(checks)
    (out / "relations.json").write_text(report.to_json() + "\n", encoding="utf-8")
    print(format_report(report))
    domain = fkm_quotient_domain(system, bins, samples, seed=seed)
    write_domain(domain, out / "quotient.json")
    LOGGER.info("Wrote FKM quotient %s with %d bins to %s", domain.name, domain.size, out)
    return EXIT_OK if report.overall_status != "fail" else EXIT_VERIFICATION


def cmd_presets(*, as_json: bool = False) -> int:
    factories = list_presets()
    if as_json:
        print(json.dumps([{"name": item.name, "parameters": list(item.parameters), "description": item.description} for item in factories], indent=2, sort_keys=True))
        return EXIT_OK
    for item in factories:
        print(f"{item.name}({', '.join(item.parameters)})  {item.description}")
    return EXIT_OK


def _parse_exponent(value: str) -> float | str:
    try:
        return float(value)
    except ValueError:
        return value


def _build_parser() -> argparse.ArgumentParser:
    logging_parent = argparse.ArgumentParser(add_help=False)
    logging_parent.add_argument("--log-level", default="INFO", help="Logging verbosity (DEBUG, INFO, WARNING, ERROR)")

    run_parent = argparse.ArgumentParser(add_help=False)
    run_parent.add_argument("--config", type=Path, help="JSON run configuration")
    run_parent.add_argument("--domain-file", type=Path, help="Weighted domain JSON (e.g. from the clifford command)")
    run_parent.add_argument("--out", type=Path, help="Output directory")
    run_parent.add_argument("--seed", type=int)
    run_parent.add_argument("--resolution", type=int)
    run_parent.add_argument("--k", type=int, help="Number of requested solutions")
    run_parent.add_argument("--p", type=_parse_exponent, help="Exponent, or 'yamabe' for 2m/(m-2)")
    run_parent.add_argument("--positive-only", action="store_true", default=None)

    parser = argparse.ArgumentParser(prog="foliated-yamabe", description=__doc__)
    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("solve", parents=[logging_parent, run_parent], help="Compute invariant solutions")
    subparsers.add_parser("verify", parents=[logging_parent, run_parent], help="Run verification suites")

    clifford = subparsers.add_parser("clifford", parents=[logging_parent], help="Build a Clifford system and its FKM quotient")
    clifford.add_argument("--q", type=int, required=True)
    clifford.add_argument("--copies", type=int, default=1)
    clifford.add_argument("--bins", type=int, default=200)
    clifford.add_argument("--samples", type=int, default=1_000_000)
    clifford.add_argument("--seed", type=int, default=0)
    clifford.add_argument("--out", type=Path, default=Path("clifford"))

    presets = subparsers.add_parser("presets", parents=[logging_parent], help="List registered presets")
    presets.add_argument("--json", action="store_true", help="Emit machine-readable JSON output")
    return parser


_OVERRIDES = ("domain_file", "out", "seed", "resolution", "k", "p", "positive_only")


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    config = _load_config(args.config) if args.config is not None else RunConfig()
    overrides = {name: getattr(args, name) for name in _OVERRIDES if getattr(args, name) is not None}
    return replace(config, **overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    log_level = getattr(logging, str(args.log_level).upper(), logging.INFO)
    logging.basicConfig(level=log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        if args.command == "presets":
            return cmd_presets(as_json=args.json)
        if args.command == "clifford":
            return cmd_clifford(args.q, args.copies, args.bins, args.samples, args.out, seed=args.seed)
        config = _resolve_config(args)
        if args.command == "solve":
            return cmd_solve(config)
        return cmd_verify(config)
    except (
        ConfigError,
        ProblemSpecError,
        CoercivityError,
        DomainError,
        PresetNotFoundError,
        UnsupportedCliffordError,
        DegenerateFoliationError,
    ) as exc:
        LOGGER.error("%s", exc)
        raise SystemExit(EXIT_CONFIG) from exc


__all__ = [
    "ConfigError",
    "EXIT_CONFIG",
    "EXIT_CONVERGENCE",
    "EXIT_OK",
    "EXIT_VERIFICATION",
    "RunConfig",
    "SUITES",
    "cmd_clifford",
    "cmd_presets",
    "cmd_solve",
    "cmd_verify",
    "main",
]

if __name__ == "__main__":  # pragma: no cover - CLI entrypoint
    raise SystemExit(main())
