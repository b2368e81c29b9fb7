"""Concave fundamental diagrams and the quantities derived from them.

The flux function f maps density in [0, 1] to vehicles per unit time. It
vanishes at 0 and 1 and has a unique maximizer rho_cr separating the
free-flow branch (increasing) from the congested branch (decreasing).
Everything downstream of this module -- junction solvers, Godunov fluxes,
diagnostics -- works in terms of f, its critical density, the companion
map tau, and the demand/supply functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FluxModel",
    "FluxDomainError",
    "InfeasibleFluxError",
    "quadratic_flux",
]

_BISECT_TOL = 1e-12


class FluxDomainError(ValueError):
    """Density outside [0, 1]."""


class InfeasibleFluxError(ValueError):
    """Requested flux exceeds the maximum of the fundamental diagram."""


def _check_density(rho: float) -> float:
    rho = float(rho)
    if not 0.0 <= rho <= 1.0:
        raise FluxDomainError(f"density {rho!r} outside [0, 1]")
    return rho


@dataclass(frozen=True)
class FluxModel:
    """A concave fundamental diagram, either quadratic or tabulated.

    kind: "quadratic" for f(rho) = rho * (1 - rho), "tabulated" for a
    piecewise-linear concave interpolant through user samples.
    """

    kind: str
    rho_cr: float
    f_max: float
    lipschitz_bound: float
    table_rho: np.ndarray | None = field(default=None, repr=False)
    table_f: np.ndarray | None = field(default=None, repr=False)

    # -- construction -------------------------------------------------

    @staticmethod
    def quadratic() -> "FluxModel":
        return FluxModel(kind="quadratic", rho_cr=0.5, f_max=0.25, lipschitz_bound=1.0)

    @staticmethod
    def from_table(points, lipschitz_bound: float | None = None) -> "FluxModel":
        """Build a tabulated model from (rho, f) samples.

        The samples must start at (0, 0), end at (1, 0), be strictly
        increasing in rho, and define a concave, unimodal profile.
        """
        pts = sorted((float(r), float(fv)) for r, fv in points)
        rho = np.array([p[0] for p in pts])
        fv = np.array([p[1] for p in pts])
        if len(rho) < 3:
            raise ValueError("flux table needs at least 3 samples")
        if rho[0] != 0.0 or rho[-1] != 1.0:
            raise ValueError("flux table must span rho in [0, 1]")
        if fv[0] != 0.0 or fv[-1] != 0.0:
            raise ValueError("flux table must satisfy f(0) = f(1) = 0")
        if np.any(np.diff(rho) <= 0):
            raise ValueError("flux table densities must be strictly increasing")
        slopes = np.diff(fv) / np.diff(rho)
        if np.any(np.diff(slopes) > 1e-12):
            raise ValueError("flux table is not concave")
        k = int(np.argmax(fv))
        if k == 0 or k == len(fv) - 1:
            raise ValueError("flux table has no interior maximizer")
        lip = float(np.max(np.abs(slopes)))
        if lipschitz_bound is not None:
            lip = max(lip, float(lipschitz_bound))
        rho_cr = FluxModel._ternary_max(rho, fv)
        model = FluxModel(
            kind="tabulated",
            rho_cr=rho_cr,
            f_max=float(np.interp(rho_cr, rho, fv)),
            lipschitz_bound=lip,
            table_rho=rho,
            table_f=fv,
        )
        return model

    @staticmethod
    def _ternary_max(rho: np.ndarray, fv: np.ndarray) -> float:
        # Ternary search on the piecewise-linear interpolant; valid for
        # concave profiles. The optimum of the interpolant sits at a knot,
        # so snap to the nearest knot at the end.
        lo, hi = 0.0, 1.0
        for _ in range(200):
            a = lo + (hi - lo) / 3.0
            b = hi - (hi - lo) / 3.0
            if np.interp(a, rho, fv) < np.interp(b, rho, fv):
                lo = a
            else:
                hi = b
        mid = 0.5 * (lo + hi)
        k = int(np.argmin(np.abs(rho - mid)))
        if abs(rho[k] - mid) < 1e-9:
            return float(rho[k])
        return float(mid)

    # -- evaluation ---------------------------------------------------

    def __call__(self, rho):
        return self.eval(rho)

    def eval(self, rho):
        """f(rho); accepts scalars or arrays, rejects out-of-range scalars."""
        if np.isscalar(rho) or np.ndim(rho) == 0:
            rho = _check_density(rho)
            if self.kind == "quadratic":
                return rho * (1.0 - rho)
            return float(np.interp(rho, self.table_rho, self.table_f))
        arr = np.asarray(rho, dtype=float)
        if np.any((arr < 0.0) | (arr > 1.0)):
            raise FluxDomainError("density array has entries outside [0, 1]")
        if self.kind == "quadratic":
            return arr * (1.0 - arr)
        return np.interp(arr, self.table_rho, self.table_f)

    def derivative(self, rho: float) -> float:
        """f'(rho); one-sided finite difference for tabulated models."""
        rho = _check_density(rho)
        if self.kind == "quadratic":
            return 1.0 - 2.0 * rho
        h = 1e-8
        lo = max(0.0, rho - h)
        hi = min(1.0, rho + h)
        return (self.eval(hi) - self.eval(lo)) / (hi - lo)

    def max_wave_speed(self, rho) -> float:
        """max |f'| over the given cell values (0 for an empty input)."""
        arr = np.atleast_1d(np.asarray(rho, dtype=float))
        if arr.size == 0:
            return 0.0
        if self.kind == "quadratic":
            return float(np.max(np.abs(1.0 - 2.0 * arr)))
        return float(max(abs(self.derivative(r)) for r in arr))

    # -- derived maps -------------------------------------------------

    def tau(self, rho: float) -> float:
        """The companion density on the opposite branch with equal flux."""
        rho = _check_density(rho)
        if self.kind == "quadratic":
            return 1.0 - rho
        if rho == self.rho_cr:
            return self.rho_cr
        branch = "congested" if rho <= self.rho_cr else "free"
        return self.inverse(self.eval(rho), branch)

    def demand(self, rho: float) -> float:
        """Maximal flux an incoming road with datum rho can send."""
        rho = _check_density(rho)
        if rho <= self.rho_cr:
            return self.eval(rho)
        return self.f_max

    def supply(self, rho: float) -> float:
        """Maximal flux an outgoing road with datum rho can absorb."""
        rho = _check_density(rho)
        if rho <= self.rho_cr:
            return self.f_max
        return self.eval(rho)

    def demand_profile(self, rho) -> np.ndarray:
        """Vectorized demand over an array of densities."""
        arr = np.asarray(rho, dtype=float)
        return np.where(arr <= self.rho_cr, self.eval(arr), self.f_max)

    def supply_profile(self, rho) -> np.ndarray:
        """Vectorized supply over an array of densities."""
        arr = np.asarray(rho, dtype=float)
        return np.where(arr <= self.rho_cr, self.f_max, self.eval(arr))

    def inverse(self, gamma: float, branch: str) -> float:
        """Density with f(rho) = gamma on the requested branch.

        branch is "free" (rho <= rho_cr) or "congested" (rho >= rho_cr).
        """
        gamma = float(gamma)
        if gamma < 0.0:
            raise InfeasibleFluxError(f"flux {gamma!r} is negative")
        if gamma > self.f_max * (1.0 + 1e-12) + 1e-15:
            raise InfeasibleFluxError(f"flux {gamma!r} exceeds f_max {self.f_max!r}")
        gamma = min(gamma, self.f_max)
        if branch not in ("free", "congested"):
            raise ValueError(f"unknown branch {branch!r}")
        if self.kind == "quadratic":
            disc = max(0.0, 1.0 - 4.0 * gamma)
            root = np.sqrt(disc)
            return 0.5 * (1.0 - root) if branch == "free" else 0.5 * (1.0 + root)
        if branch == "free":
            lo, hi = 0.0, self.rho_cr
        else:
            lo, hi = self.rho_cr, 1.0
        # f is monotone on each branch; bisect to absolute density tolerance.
        increasing = branch == "free"
        while hi - lo > _BISECT_TOL:
            mid = 0.5 * (lo + hi)
            val = self.eval(mid)
            if (val < gamma) == increasing:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    # -- serialization helpers ---------------------------------------

    def to_config(self):
        if self.kind == "quadratic":
            return "quadratic"
        return {
            "table": [[float(r), float(fv)] for r, fv in zip(self.table_rho, self.table_f)],
            "lipschitz": float(self.lipschitz_bound),
        }

    @staticmethod
    def from_config(cfg) -> "FluxModel":
        if cfg == "quadratic":
            return FluxModel.quadratic()
        if isinstance(cfg, dict) and "table" in cfg:
            return FluxModel.from_table(cfg["table"], cfg.get("lipschitz"))
        raise ValueError(f"unrecognized flux declaration {cfg!r}")


def quadratic_flux() -> FluxModel:
    return FluxModel.quadratic()
