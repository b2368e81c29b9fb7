"""netlwr: macroscopic traffic simulation on road networks.

Scalar conservation-law dynamics per road (concave fundamental diagram),
priority-based junction Riemann solvers, a Godunov finite-volume engine,
scenario-driven runs with CSV output, and a verification harness for the
solver's structural properties.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .flux import FluxModel, FluxDomainError, InfeasibleFluxError, quadratic_flux
from .junction import (
    ConstraintBounds,
    JunctionFluxes,
    JunctionSpec,
    UnsupportedJunctionError,
    bounds_from_data,
    get_solver,
    hbar,
    solve_maxflux_baseline,
    solve_prs,
    solve_sprs,
)
from .traces import BoundaryTrace, check_consistency, reconstruct, solver_equilibrium
from .godunov import (
    BoundaryAttach,
    CFLViolationError,
    JunctionAttach,
    Network,
    NetworkJunction,
    RoadGrid,
    Trajectory,
    compute_dt,
    godunov_flux,
    run,
    step,
)
from .scenario import (
    Scenario,
    ScenarioError,
    build_network,
    builtin_scenario,
    load_scenario,
    parse_scenario,
    serialize_scenario,
    write_results,
)
from .diagnostics import (
    InteractionExperiment,
    InteractionResult,
    interaction_fixtures,
    check_fixture,
    check_p1,
    check_p2_p3,
    gamma_functional,
    run_interaction,
    tv_flux,
)

__all__ = [
    "__version__",
    "FluxModel",
    "FluxDomainError",
    "InfeasibleFluxError",
    "quadratic_flux",
    "ConstraintBounds",
    "JunctionFluxes",
    "JunctionSpec",
    "UnsupportedJunctionError",
    "bounds_from_data",
    "get_solver",
    "hbar",
    "solve_maxflux_baseline",
    "solve_prs",
    "solve_sprs",
    "BoundaryTrace",
    "check_consistency",
    "reconstruct",
    "solver_equilibrium",
    "BoundaryAttach",
    "CFLViolationError",
    "JunctionAttach",
    "Network",
    "NetworkJunction",
    "RoadGrid",
    "Trajectory",
    "compute_dt",
    "godunov_flux",
    "run",
    "step",
    "Scenario",
    "ScenarioError",
    "build_network",
    "builtin_scenario",
    "load_scenario",
    "parse_scenario",
    "serialize_scenario",
    "write_results",
    "InteractionExperiment",
    "InteractionResult",
    "interaction_fixtures",
    "check_fixture",
    "check_p1",
    "check_p2_p3",
    "gamma_functional",
    "run_interaction",
    "tv_flux",
]
