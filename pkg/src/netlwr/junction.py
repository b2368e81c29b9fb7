"""Junction Riemann solvers mapping per-road data to in/out fluxes.

A junction couples n incoming and m outgoing roads through a
column-stochastic distribution matrix A and a priority vector P. Given
per-road demand/supply bounds, the priority solver pushes flux along the
ray h*P until a constraint binds; a supply constraint terminates the
recursion (hard priorities) or fixes only the roads feeding it (soft
priorities). A flux-maximizing baseline solves the same feasibility
polytope as a small linear program by vertex enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .flux import FluxModel

__all__ = [
    "JunctionSpec",
    "ConstraintBounds",
    "JunctionFluxes",
    "RecursionStep",
    "UnsupportedJunctionError",
    "bounds_from_data",
    "hbar",
    "solve_prs",
    "solve_sprs",
    "solve_maxflux_baseline",
    "get_solver",
    "SOLVERS",
]

_REL_TIE = 1e-12
_ABS_TIE = 1e-15


class UnsupportedJunctionError(ValueError):
    """Junction shape not handled by the requested solver."""


@dataclass(frozen=True)
class JunctionSpec:
    """n incoming roads, m outgoing roads, distribution matrix, priorities."""

    n: int
    m: int
    A: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        P = np.asarray(self.P, dtype=float)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "P", P)
        if A.shape != (self.m, self.n):
            raise ValueError(f"distribution matrix shape {A.shape} != ({self.m}, {self.n})")
        if P.shape != (self.n,):
            raise ValueError(f"priority vector length {P.shape} != {self.n}")
        if np.any(A < 0.0) or np.any(A > 1.0):
            raise ValueError("distribution coefficients must lie in [0, 1]")
        colsums = A.sum(axis=0)
        bad = np.where(np.abs(colsums - 1.0) > 1e-12)[0]
        if bad.size:
            raise ValueError(
                f"distribution matrix column {bad[0] + 1} sums to {colsums[bad[0]]!r}, expected 1"
            )
        if np.any(P <= 0.0):
            raise ValueError("priorities must be strictly positive")
        if abs(P.sum() - 1.0) > 1e-12:
            raise ValueError(f"priorities sum to {P.sum()!r}, expected 1")


@dataclass(frozen=True)
class ConstraintBounds:
    """Per-road flux bounds: demands for incoming, supplies for outgoing."""

    gamma_max_in: np.ndarray
    gamma_max_out: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gamma_max_in", np.asarray(self.gamma_max_in, dtype=float))
        object.__setattr__(self, "gamma_max_out", np.asarray(self.gamma_max_out, dtype=float))
        if np.any(self.gamma_max_in < 0.0) or np.any(self.gamma_max_out < 0.0):
            raise ValueError("flux bounds must be nonnegative")


@dataclass(frozen=True)
class RecursionStep:
    """One iteration of the priority recursion, kept for trace printing."""

    h_in: dict
    h_out: dict
    hbar: float
    branch: str  # "supply" or "demand"
    fixed: tuple


@dataclass(frozen=True)
class JunctionFluxes:
    """Solver output: incoming fluxes Q, outgoing fluxes A.Q, first-step h."""

    q_in: np.ndarray
    q_out: np.ndarray
    hbar: float
    steps: tuple = field(default=(), compare=False, repr=False)

    @property
    def total(self) -> float:
        return float(self.q_in.sum())


def bounds_from_data(model: FluxModel, spec: JunctionSpec, rho0) -> ConstraintBounds:
    """Demands of the incoming data and supplies of the outgoing data."""
    rho0 = np.asarray(rho0, dtype=float)
    if rho0.shape != (spec.n + spec.m,):
        raise ValueError(f"expected {spec.n + spec.m} densities, got {rho0.shape}")
    gin = np.array([model.demand(r) for r in rho0[: spec.n]])
    gout = np.array([model.supply(r) for r in rho0[spec.n :]])
    return ConstraintBounds(gin, gout)


def hbar(spec: JunctionSpec, bounds: ConstraintBounds) -> float:
    """Reach of the priority ray h*P inside the feasible polytope."""
    h = math.inf
    for i in range(spec.n):
        h = min(h, bounds.gamma_max_in[i] / spec.P[i])
    ap = spec.A @ spec.P
    for j in range(spec.m):
        if ap[j] > 0.0:
            h = min(h, bounds.gamma_max_out[j] / ap[j])
    return h


def _close(a: float, b: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= max(_REL_TIE * max(abs(a), abs(b)), _ABS_TIE)


def _solve_priority(spec: JunctionSpec, bounds: ConstraintBounds, soft: bool) -> JunctionFluxes:
    n, m = spec.n, spec.m
    A, P = spec.A, spec.P
    gin, gout = bounds.gamma_max_in, bounds.gamma_max_out
    q = np.full(n, np.nan)
    unfixed = list(range(n))
    steps = []
    first_h = None
    prev_h = -math.inf
    iterations = 0
    while unfixed:
        iterations += 1
        assert iterations <= n, "priority recursion failed to terminate"
        h_in = {i: gin[i] / P[i] for i in unfixed}
        h_out = {}
        for j in range(m):
            coef = float(sum(A[j, i] * P[i] for i in unfixed))
            used = float(sum(A[j, i] * q[i] for i in range(n) if i not in unfixed))
            slack = gout[j] - used
            if coef <= 0.0:
                # Constraint no longer depends on h; prior steps guarantee
                # feasibility of the already-fixed components.
                assert slack >= -1e-12, f"outgoing constraint {j} violated by fixed fluxes"
                h_out[j] = math.inf
            else:
                h_out[j] = max(slack, 0.0) / coef
        h = min(min(h_in.values()), min(h_out.values(), default=math.inf))
        assert h >= prev_h - max(1e-12 * abs(h), 1e-15), "recursion h sequence decreased"
        prev_h = max(prev_h, h)
        if first_h is None:
            first_h = h
        binding_out = [j for j, hj in h_out.items() if _close(hj, h)]
        if binding_out:
            if soft:
                fixed = [i for i in unfixed if any(A[j, i] != 0.0 for j in binding_out)]
            else:
                fixed = list(unfixed)
            for i in fixed:
                q[i] = h * P[i]
            unfixed = [i for i in unfixed if i not in fixed]
            steps.append(RecursionStep(h_in, h_out, h, "supply", tuple(fixed)))
        else:
            fixed = [i for i in unfixed if _close(h_in[i], h)]
            for i in fixed:
                q[i] = h * P[i]
            unfixed = [i for i in unfixed if i not in fixed]
            steps.append(RecursionStep(h_in, h_out, h, "demand", tuple(fixed)))
    q_out = A @ q
    return JunctionFluxes(q_in=q, q_out=q_out, hbar=first_h, steps=tuple(steps))


def solve_prs(spec: JunctionSpec, bounds: ConstraintBounds) -> JunctionFluxes:
    """Priority solver: a binding supply fixes all remaining roads."""
    return _solve_priority(spec, bounds, soft=False)


def solve_sprs(spec: JunctionSpec, bounds: ConstraintBounds) -> JunctionFluxes:
    """Soft-priority solver: a binding supply fixes only the roads feeding it."""
    return _solve_priority(spec, bounds, soft=True)


def solve_maxflux_baseline(spec: JunctionSpec, bounds: ConstraintBounds) -> JunctionFluxes:
    """Maximize total incoming flux over the feasible polytope.

    Enumerates vertices of the (n+m+n)-constraint system in n variables;
    ties are broken lexicographically by descending flux vector. Rejects
    junctions with more incoming than outgoing roads.
    """
    n, m = spec.n, spec.m
    if n > m:
        raise UnsupportedJunctionError(
            f"flux-maximizing baseline needs n <= m, got n={n}, m={m}"
        )
    gin, gout = bounds.gamma_max_in, bounds.gamma_max_out
    # Rows of the inequality system a . q <= b.
    rows = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        rows.append((e, gin[i]))
        rows.append((-e, 0.0))
    for j in range(m):
        rows.append((spec.A[j].copy(), gout[j]))
    mat = np.array([r[0] for r in rows])
    rhs = np.array([r[1] for r in rows])

    best = None
    from itertools import combinations

    for idx in combinations(range(len(rows)), n):
        sub = mat[list(idx)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        v = np.linalg.solve(sub, rhs[list(idx)])
        if np.any(mat @ v > rhs + 1e-9):
            continue
        v = np.clip(v, 0.0, gin)
        key = (float(v.sum()), tuple(v))
        if best is None or key > best[0]:
            best = (key, v)
    assert best is not None, "feasible polytope is empty"
    q = best[1]
    return JunctionFluxes(q_in=q, q_out=spec.A @ q, hbar=hbar(spec, bounds), steps=())


SOLVERS = {
    "prs": solve_prs,
    "sprs": solve_sprs,
    "maxflux": solve_maxflux_baseline,
}


def get_solver(name: str):
    try:
        return SOLVERS[name]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; expected one of {sorted(SOLVERS)}") from None
