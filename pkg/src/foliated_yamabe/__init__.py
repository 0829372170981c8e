"""Foliation-invariant solutions of Yamabe-type equations.

A singular Riemannian foliation of codimension one reduces invariant
solutions of ``-Lap u + b u = c |u|^(p-2) u`` to a weighted problem on an
interval. The package discretises that leaf space, minimises the energy on
the Nehari manifold with a theta-gradient flow, and checks the results
against independent oracles::

    from foliated_yamabe import FlowConfig, build_problem, find_least_energy, make_preset

    domain = make_preset("okon-sphere(2,2)", 512)
    spec = build_problem(domain, 4.0, b=2.0, c=1.0)
    record = find_least_energy(spec, domain, FlowConfig())
"""

from __future__ import annotations

from .presets import EndpointKind, FoliationPreset, PresetNotFoundError, get_preset, list_presets
from .quotient import (
    DomainError,
    DomainMismatchError,
    UnderSamplingError,
    WeightedDomain,
    integrate,
    make_preset,
    pushforward_mc,
    read_domain,
    write_domain,
)
from .clifford import (
    CliffordSystem,
    DegenerateFoliationError,
    build_clifford_system,
    fkm_quotient_domain,
    fkm_value,
    pi_rho,
)
from .discrete import (
    CoercivityError,
    Field,
    ProblemSpec,
    ProblemSpecError,
    build_problem,
    estimate_mu,
    helmholtz_solve,
    inner_b,
    inner_h1,
    inner_theta,
)
from .energy import (
    NehariPoint,
    ProjectionError,
    derivative,
    energy,
    gradient_theta,
    nehari_residual,
    project_nehari,
    project_nodal_nehari,
)
from .verify import (
    AmbientGrid,
    OracleError,
    critical_exponent,
    embedding_ratio,
    shooting_oracle,
    strong_residual,
    symmetric_criticality_check,
)
from .flow import (
    ConeTrappingError,
    ConvergenceError,
    FlowConfig,
    SolutionRecord,
    find_least_energy,
    find_sign_changing,
    find_solutions,
)
from .reports import VerificationCheck, VerificationReport
from .artifacts import read_solutions, write_solutions

__version__ = "0.1.0"

__all__ = [
    "AmbientGrid",
    "CliffordSystem",
    "CoercivityError",
    "ConeTrappingError",
    "ConvergenceError",
    "DegenerateFoliationError",
    "DomainError",
    "DomainMismatchError",
    "EndpointKind",
    "Field",
    "FlowConfig",
    "FoliationPreset",
    "NehariPoint",
    "OracleError",
    "PresetNotFoundError",
    "ProblemSpec",
    "ProblemSpecError",
    "ProjectionError",
    "SolutionRecord",
    "UnderSamplingError",
    "VerificationCheck",
    "VerificationReport",
    "WeightedDomain",
    "build_clifford_system",
    "build_problem",
    "critical_exponent",
    "derivative",
    "embedding_ratio",
    "energy",
    "estimate_mu",
    "find_least_energy",
    "find_sign_changing",
    "find_solutions",
    "fkm_quotient_domain",
    "fkm_value",
    "get_preset",
    "gradient_theta",
    "helmholtz_solve",
    "inner_b",
    "inner_h1",
    "inner_theta",
    "integrate",
    "list_presets",
    "make_preset",
    "nehari_residual",
    "pi_rho",
    "project_nehari",
    "project_nodal_nehari",
    "pushforward_mc",
    "read_domain",
    "read_solutions",
    "shooting_oracle",
    "strong_residual",
    "symmetric_criticality_check",
    "write_domain",
    "write_solutions",
    "__version__",
]
