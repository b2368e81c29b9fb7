"""Boundary densities realizing junction fluxes with admissible waves.

Given the fluxes selected at a junction, each road needs a boundary
density whose flux matches and whose wave toward the road interior has
the right sign: nonpositive speeds entering an incoming road, nonnegative
speeds entering an outgoing one. An incoming road therefore keeps its
datum when the flux already matches and otherwise jumps to the congested
branch; an outgoing road keeps its datum or jumps to the free branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flux import FluxModel
from .junction import ConstraintBounds, JunctionFluxes, JunctionSpec, bounds_from_data

__all__ = ["BoundaryTrace", "reconstruct", "check_consistency"]

# Branch selection compares f(datum) with the assigned flux at this
# absolute tolerance; below it the original datum is kept.
_FLUX_EQ_TOL = 1e-10


class InfeasibleTraceError(ValueError):
    """Assigned flux exceeds the demand/supply of the datum."""


@dataclass(frozen=True)
class BoundaryTrace:
    """Per-road boundary densities, incoming roads first."""

    rho_bar: np.ndarray


def reconstruct(model: FluxModel, rho0, fluxes: JunctionFluxes) -> BoundaryTrace:
    """Boundary densities for the given data and junction fluxes."""
    rho0 = np.asarray(rho0, dtype=float)
    n = len(fluxes.q_in)
    m = len(fluxes.q_out)
    if rho0.shape != (n + m,):
        raise ValueError(f"expected {n + m} densities, got {rho0.shape}")
    out = np.empty(n + m)
    for i in range(n):
        gamma = fluxes.q_in[i]
        if gamma > model.demand(rho0[i]) + _FLUX_EQ_TOL:
            raise InfeasibleTraceError(
                f"incoming road {i + 1}: flux {gamma!r} exceeds demand of datum {rho0[i]!r}"
            )
        if abs(model.eval(rho0[i]) - gamma) <= _FLUX_EQ_TOL:
            out[i] = rho0[i]
        else:
            out[i] = model.inverse(gamma, "congested")
    for j in range(m):
        gamma = fluxes.q_out[j]
        if gamma > model.supply(rho0[n + j]) + _FLUX_EQ_TOL:
            raise InfeasibleTraceError(
                f"outgoing road {j + 1}: flux {gamma!r} exceeds supply of datum {rho0[n + j]!r}"
            )
        if abs(model.eval(rho0[n + j]) - gamma) <= _FLUX_EQ_TOL:
            out[n + j] = rho0[n + j]
        else:
            out[n + j] = model.inverse(gamma, "free")
    return BoundaryTrace(rho_bar=out)


def check_consistency(
    model: FluxModel,
    spec: JunctionSpec,
    solver,
    rho0,
    tol: float = 1e-10,
) -> bool:
    """True iff re-solving on the reconstructed trace reproduces it."""
    rho0 = np.asarray(rho0, dtype=float)
    first = solver(spec, bounds_from_data(model, spec, rho0))
    trace = reconstruct(model, rho0, first).rho_bar
    second = solver(spec, bounds_from_data(model, spec, trace))
    trace2 = reconstruct(model, trace, second).rho_bar
    return bool(
        np.max(np.abs(trace2 - trace)) <= tol
        and np.max(np.abs(second.q_in - first.q_in)) <= tol
        and np.max(np.abs(second.q_out - first.q_out)) <= tol
    )


def solver_equilibrium(model: FluxModel, spec: JunctionSpec, solver, rho0) -> np.ndarray:
    """Map arbitrary data to the solver's equilibrium (its boundary trace)."""
    rho0 = np.asarray(rho0, dtype=float)
    fluxes = solver(spec, bounds_from_data(model, spec, rho0))
    return reconstruct(model, rho0, fluxes).rho_bar
