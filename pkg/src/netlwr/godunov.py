"""Godunov finite-volume engine for the network conservation law.

Each road carries cell-averaged densities. Interior interfaces use the
exact Riemann flux between adjacent averages; free road ends use constant
Dirichlet ghost cells; junction-attached ends use the fluxes produced by
the configured junction solver applied to the adjacent cell averages.
Time steps adapt to the CFL bound recomputed from the current state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flux import FluxModel
from .junction import JunctionFluxes, JunctionSpec, bounds_from_data, get_solver

__all__ = [
    "BoundaryAttach",
    "JunctionAttach",
    "RoadGrid",
    "NetworkJunction",
    "Network",
    "TimeStepRecord",
    "Trajectory",
    "godunov_flux",
    "compute_dt",
    "step",
    "run",
    "CFLViolationError",
]


class CFLViolationError(RuntimeError):
    """Requested step exceeds the CFL bound for the current state."""


@dataclass(frozen=True)
class BoundaryAttach:
    """Constant Dirichlet ghost value at a free road end."""

    value: float


@dataclass(frozen=True)
class JunctionAttach:
    """Attachment of a road end to one junction slot."""

    junction_id: str
    side: str  # "in" (road feeds the junction) or "out" (road is fed)
    slot: int


@dataclass
class RoadGrid:
    """One road's discretization and endpoint attachments."""

    road_id: str
    M: int
    dx: float
    rho: np.ndarray
    left_attach: BoundaryAttach | JunctionAttach
    right_attach: BoundaryAttach | JunctionAttach

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        if self.M < 2:
            raise ValueError(f"road {self.road_id}: need at least 2 cells, got {self.M}")
        if self.dx <= 0:
            raise ValueError(f"road {self.road_id}: dx must be positive")
        if self.rho.shape != (self.M,):
            raise ValueError(f"road {self.road_id}: density array shape mismatch")
        if np.any((self.rho < 0.0) | (self.rho > 1.0)):
            raise ValueError(f"road {self.road_id}: densities outside [0, 1]")

    def mass(self) -> float:
        return float(self.rho.sum() * self.dx)


@dataclass
class NetworkJunction:
    junction_id: str
    spec: JunctionSpec
    incoming: list
    outgoing: list


@dataclass
class Network:
    model: FluxModel
    roads: dict
    junctions: dict


@dataclass
class TimeStepRecord:
    """Post-step time, step size, and the junction fluxes used."""

    t: float
    dt: float
    junction_fluxes: dict


@dataclass
class Trajectory:
    sample_times: list = field(default_factory=list)
    samples: list = field(default_factory=list)  # (requested_t, actual_t, {road_id: rho})
    records: list = field(default_factory=list)
    initial_mass: dict = field(default_factory=dict)
    inflow_integral: dict = field(default_factory=dict)
    outflow_integral: dict = field(default_factory=dict)

    def final_record(self) -> TimeStepRecord | None:
        return self.records[-1] if self.records else None


def godunov_flux(model: FluxModel, u: float, v: float) -> float:
    """Exact Riemann flux between left state u and right state v."""
    # For concave f this is min(demand(u), supply(v)).
    return min(model.demand(u), model.supply(v))


def compute_dt(model: FluxModel, roads, cfl_safety: float = 1.0) -> float:
    """CFL-limited step: cfl * dx / (2 max|f'|) over all cells and ghosts."""
    roads = list(roads)
    if not roads:
        raise ValueError("network has no roads")
    speed = 0.0
    min_dx = min(r.dx for r in roads)
    for r in roads:
        speed = max(speed, model.max_wave_speed(r.rho))
        for att in (r.left_attach, r.right_attach):
            if isinstance(att, BoundaryAttach):
                speed = max(speed, abs(model.derivative(att.value)))
    if speed <= 0.0:
        # Uniform state at the critical density: fall back to the global
        # Lipschitz bound instead of letting dt blow up.
        speed = model.lipschitz_bound
    return cfl_safety * 0.5 * min_dx / speed


def _junction_data(network: Network, junction: NetworkJunction) -> np.ndarray:
    vals = [network.roads[rid].rho[-1] for rid in junction.incoming]
    vals += [network.roads[rid].rho[0] for rid in junction.outgoing]
    return np.array(vals)


def solve_junctions(network: Network, solver) -> dict:
    """Solve every junction on the current cell averages (read-only)."""
    out = {}
    for jid, junction in network.junctions.items():
        data = _junction_data(network, junction)
        bounds = bounds_from_data(network.model, junction.spec, data)
        out[jid] = solver(junction.spec, bounds)
    return out


def step(
    network: Network,
    solver,
    dt: float,
    t: float = 0.0,
    trajectory: Trajectory | None = None,
) -> TimeStepRecord:
    """Advance the whole network by one step of size dt (in place)."""
    model = network.model
    dt_max = compute_dt(model, network.roads.values(), 1.0)
    if dt > dt_max * (1.0 + 1e-12):
        raise CFLViolationError(f"dt={dt!r} exceeds CFL bound {dt_max!r}")
    junction_fluxes = solve_junctions(network, solver)

    # Conservation check at every junction, every step.
    for jid, fx in junction_fluxes.items():
        assert abs(fx.q_in.sum() - fx.q_out.sum()) <= 1e-12, (
            f"junction {jid}: flux imbalance {fx.q_in.sum() - fx.q_out.sum()!r}"
        )

    for rid, road in network.roads.items():
        u = road.rho
        F = np.empty(road.M + 1)
        F[1:-1] = np.minimum(model.demand_profile(u[:-1]), model.supply_profile(u[1:]))
        la, ra = road.left_attach, road.right_attach
        if isinstance(la, BoundaryAttach):
            F[0] = godunov_flux(model, la.value, u[0])
        else:
            F[0] = junction_fluxes[la.junction_id].q_out[la.slot]
        if isinstance(ra, BoundaryAttach):
            F[-1] = godunov_flux(model, u[-1], ra.value)
        else:
            F[-1] = junction_fluxes[ra.junction_id].q_in[ra.slot]
        u_new = u - (dt / road.dx) * (F[1:] - F[:-1])
        assert np.all(u_new >= -1e-12) and np.all(u_new <= 1.0 + 1e-12), (
            f"road {rid}: maximum principle violated"
        )
        road.rho = np.clip(u_new, 0.0, 1.0)
        if trajectory is not None:
            trajectory.inflow_integral[rid] += dt * F[0]
            trajectory.outflow_integral[rid] += dt * F[-1]

    record = TimeStepRecord(t=t + dt, dt=dt, junction_fluxes=junction_fluxes)
    if trajectory is not None:
        trajectory.records.append(record)
    return record


def run(
    network: Network,
    solver_choice: str,
    T: float,
    cfl_safety: float = 1.0,
    sample_times=(),
) -> Trajectory:
    """Advance from t=0 to T, sampling states at the requested times.

    States are recorded at the first step landing at or after each sample
    time (no interpolation between steps).
    """
    solver = get_solver(solver_choice) if isinstance(solver_choice, str) else solver_choice
    trajectory = Trajectory(sample_times=sorted(float(s) for s in sample_times))
    for rid, road in network.roads.items():
        trajectory.initial_mass[rid] = road.mass()
        trajectory.inflow_integral[rid] = 0.0
        trajectory.outflow_integral[rid] = 0.0

    pending = list(trajectory.sample_times)
    t = 0.0

    def take_samples(now: float):
        state = None
        while pending and pending[0] <= now + 1e-15:
            requested = pending.pop(0)
            if state is None:
                state = {rid: road.rho.copy() for rid, road in network.roads.items()}
            trajectory.samples.append((requested, now, state))

    take_samples(0.0)
    while t < T - 1e-15:
        dt = min(compute_dt(network.model, network.roads.values(), cfl_safety), T - t)
        record = step(network, solver, dt, t=t, trajectory=trajectory)
        t = record.t
        take_samples(t)
    return trajectory
