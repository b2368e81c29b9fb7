"""Figure rendering for simulation output.

Renders per-road density profiles at the sampled times and junction
time-series (through-flux, ray reach, per-road fluxes) as PNG files next
to the delimited output. Uses the non-interactive Agg backend so it works
headless.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .godunov import Network, Trajectory
from .scenario import Scenario, road_coordinates

__all__ = ["render_profiles", "render_junction_series", "render_all", "render_comparison"]


def render_profiles(trajectory: Trajectory, scenario: Scenario, network: Network, outdir: str) -> list:
    """One figure per road: density profiles at every sampled time."""
    written = []
    if not trajectory.samples:
        return written
    for rid in network.roads:
        x = road_coordinates(scenario, network, rid)
        fig, ax = plt.subplots(figsize=(6, 4))
        for requested_t, _actual_t, state in trajectory.samples:
            ax.plot(x, state[rid], drawstyle="steps-mid", label=f"t = {requested_t:g}")
        ax.set_xlabel("x")
        ax.set_ylabel("density")
        ax.set_ylim(-0.02, 1.02)
        ax.set_title(f"road {rid}")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = os.path.join(outdir, f"road_{rid}.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def render_junction_series(trajectory: Trajectory, network: Network, outdir: str) -> list:
    """One figure per junction: Gamma, h and per-road fluxes over time."""
    written = []
    if not trajectory.records:
        return written
    times = [rec.t for rec in trajectory.records]
    for jid, junction in network.junctions.items():
        n, m = junction.spec.n, junction.spec.m
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
        gammas = [float(rec.junction_fluxes[jid].q_in.sum()) for rec in trajectory.records]
        hbars = [rec.junction_fluxes[jid].hbar for rec in trajectory.records]
        ax1.plot(times, gammas, label="through-flux")
        ax1.plot(times, hbars, label="ray reach h")
        ax1.set_ylabel("flux")
        ax1.legend(fontsize=8)
        ax1.set_title(f"junction {jid}")
        for k in range(n):
            ax2.plot(times, [rec.junction_fluxes[jid].q_in[k] for rec in trajectory.records],
                     label=f"in {junction.incoming[k]}")
        for k in range(m):
            ax2.plot(times, [rec.junction_fluxes[jid].q_out[k] for rec in trajectory.records],
                     "--", label=f"out {junction.outgoing[k]}")
        ax2.set_xlabel("t")
        ax2.set_ylabel("flux")
        ax2.legend(fontsize=8)
        fig.tight_layout()
        path = os.path.join(outdir, f"junction_{jid}.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def render_all(trajectory: Trajectory, scenario: Scenario, network: Network, outdir: str) -> list:
    os.makedirs(outdir, exist_ok=True)
    return render_profiles(trajectory, scenario, network, outdir) + render_junction_series(
        trajectory, network, outdir
    )


def render_comparison(results: dict, scenario: Scenario, outdir: str) -> list:
    """Overlay final density profiles of several solvers per road.

    results: {solver_name: (trajectory, network)} sharing one grid.
    """
    os.makedirs(outdir, exist_ok=True)
    written = []
    some_network = next(iter(results.values()))[1]
    for rid in some_network.roads:
        fig, ax = plt.subplots(figsize=(6, 4))
        for name, (trajectory, network) in results.items():
            if not trajectory.samples:
                continue
            x = road_coordinates(scenario, network, rid)
            _req, _act, state = trajectory.samples[-1]
            ax.plot(x, state[rid], drawstyle="steps-mid", label=name)
        ax.set_xlabel("x")
        ax.set_ylabel("density")
        ax.set_ylim(-0.02, 1.02)
        ax.set_title(f"road {rid} at final sample")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = os.path.join(outdir, f"compare_road_{rid}.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
