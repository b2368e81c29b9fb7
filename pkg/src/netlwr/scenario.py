"""Declarative scenarios: topology, data, run parameters, persistence.

A scenario document is YAML with top-level keys ``flux``, ``solver``,
``T``, ``cfl_safety``, ``sample_times``, ``roads`` and ``junctions``.
Roads list their id, length, cell count, initial profile (a constant or
piecewise-constant segments) and optional explicit boundary values.
Junctions name their incoming/outgoing roads and carry the distribution
matrix and priority vector. See README for the full schema.
"""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass, field, asdict

import numpy as np
import yaml

from .flux import FluxModel
from .godunov import (
    BoundaryAttach,
    JunctionAttach,
    Network,
    NetworkJunction,
    RoadGrid,
    Trajectory,
)
from .junction import JunctionSpec

__all__ = [
    "Scenario",
    "RoadConfig",
    "JunctionConfig",
    "ScenarioError",
    "parse_scenario",
    "load_scenario",
    "serialize_scenario",
    "builtin_scenario",
    "BUILTIN_NAMES",
    "build_network",
    "write_results",
]


class ScenarioError(ValueError):
    """Malformed or semantically invalid scenario document."""


@dataclass
class RoadConfig:
    road_id: str
    length: float
    cells: int
    # Piecewise-constant initial profile: [(x_from, x_to, rho), ...] in
    # road-local coordinates covering [0, length].
    initial: list
    left_boundary: float | None = None
    right_boundary: float | None = None


@dataclass
class JunctionConfig:
    junction_id: str
    incoming: list
    outgoing: list
    A: list
    P: list

    def spec(self) -> JunctionSpec:
        return JunctionSpec(
            n=len(self.incoming),
            m=len(self.outgoing),
            A=np.array(self.A, dtype=float),
            P=np.array(self.P, dtype=float),
        )


@dataclass
class Scenario:
    flux: object
    roads: list
    junctions: list
    solver_choice: str = "prs"
    T: float = 1.0
    cfl_safety: float = 1.0
    sample_times: list = field(default_factory=list)
    output_dir: str | None = None

    def flux_model(self) -> FluxModel:
        return FluxModel.from_config(self.flux)

    def road(self, road_id: str) -> RoadConfig:
        for r in self.roads:
            if r.road_id == road_id:
                return r
        raise KeyError(road_id)


# -- parsing and validation ------------------------------------------


def _normalize_initial(raw, road_id: str, length: float) -> list:
    if isinstance(raw, (int, float)):
        segments = [(0.0, float(length), float(raw))]
    elif isinstance(raw, list):
        segments = []
        for k, seg in enumerate(raw):
            try:
                segments.append((float(seg["from"]), float(seg["to"]), float(seg["rho"])))
            except (TypeError, KeyError) as exc:
                raise ScenarioError(
                    f"road {road_id!r}: initial segment {k} needs keys from/to/rho"
                ) from exc
    else:
        raise ScenarioError(f"road {road_id!r}: initial must be a number or a list of segments")
    pos = 0.0
    for x0, x1, rho in segments:
        if abs(x0 - pos) > 1e-12 or x1 <= x0:
            raise ScenarioError(
                f"road {road_id!r}: initial segments must cover [0, {length}] contiguously"
            )
        if not 0.0 <= rho <= 1.0:
            raise ScenarioError(f"road {road_id!r}: initial density {rho!r} outside [0, 1]")
        pos = x1
    if abs(pos - length) > 1e-9:
        raise ScenarioError(f"road {road_id!r}: initial segments end at {pos}, expected {length}")
    return [list(s) for s in segments]


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a YAML scenario document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"invalid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a mapping")
    return scenario_from_dict(doc)


def scenario_from_dict(doc: dict) -> Scenario:
    for key in ("flux", "roads", "junctions"):
        if key not in doc:
            raise ScenarioError(f"missing required field {key!r}")
    try:
        FluxModel.from_config(doc["flux"])
    except ValueError as exc:
        raise ScenarioError(f"flux declaration: {exc}") from exc

    roads = []
    seen = set()
    for entry in doc["roads"]:
        try:
            rid = str(entry["id"])
            length = float(entry["length"])
            cells = int(entry.get("cells", 100))
        except (TypeError, KeyError) as exc:
            raise ScenarioError(f"road entry {entry!r} needs id and length") from exc
        if rid in seen:
            raise ScenarioError(f"duplicate road id {rid!r}")
        seen.add(rid)
        if length <= 0:
            raise ScenarioError(f"road {rid!r}: length must be positive")
        if cells < 2:
            raise ScenarioError(f"road {rid!r}: need at least 2 cells")
        roads.append(
            RoadConfig(
                road_id=rid,
                length=length,
                cells=cells,
                initial=_normalize_initial(entry.get("initial", 0.0), rid, length),
                left_boundary=None
                if entry.get("left_boundary") is None
                else float(entry["left_boundary"]),
                right_boundary=None
                if entry.get("right_boundary") is None
                else float(entry["right_boundary"]),
            )
        )

    junctions = []
    jseen = set()
    for entry in doc["junctions"]:
        try:
            jid = str(entry["id"])
            incoming = [str(r) for r in entry["incoming"]]
            outgoing = [str(r) for r in entry["outgoing"]]
            A = [[float(a) for a in row] for row in entry["A"]]
            P = [float(p) for p in entry["P"]]
        except (TypeError, KeyError) as exc:
            raise ScenarioError(
                f"junction entry {entry!r} needs id, incoming, outgoing, A, P"
            ) from exc
        if jid in jseen:
            raise ScenarioError(f"duplicate junction id {jid!r}")
        jseen.add(jid)
        junctions.append(JunctionConfig(jid, incoming, outgoing, A, P))

    scenario = Scenario(
        flux=doc["flux"],
        roads=roads,
        junctions=junctions,
        solver_choice=str(doc.get("solver", "prs")),
        T=float(doc.get("T", 1.0)),
        cfl_safety=float(doc.get("cfl_safety", 1.0)),
        sample_times=[float(t) for t in doc.get("sample_times", [])],
        output_dir=doc.get("output_dir"),
    )
    validate_scenario(scenario)
    return scenario


def validate_scenario(scenario: Scenario) -> None:
    if scenario.solver_choice not in ("prs", "sprs", "maxflux"):
        raise ScenarioError(f"unknown solver {scenario.solver_choice!r}")
    if scenario.T < 0:
        raise ScenarioError("T must be nonnegative")
    if not 0 < scenario.cfl_safety <= 1.0:
        raise ScenarioError("cfl_safety must lie in (0, 1]")
    road_ids = {r.road_id for r in scenario.roads}
    right_used: dict = {}
    left_used: dict = {}
    for jc in scenario.junctions:
        n, m = len(jc.incoming), len(jc.outgoing)
        if n == 0 or m == 0:
            raise ScenarioError(f"junction {jc.junction_id!r}: needs incoming and outgoing roads")
        for rid in jc.incoming:
            if rid not in road_ids:
                raise ScenarioError(f"junction {jc.junction_id!r}: unknown incoming road {rid!r}")
            if rid in right_used:
                raise ScenarioError(
                    f"road {rid!r}: right endpoint attached to both "
                    f"{right_used[rid]!r} and {jc.junction_id!r}"
                )
            right_used[rid] = jc.junction_id
        for rid in jc.outgoing:
            if rid not in road_ids:
                raise ScenarioError(f"junction {jc.junction_id!r}: unknown outgoing road {rid!r}")
            if rid in left_used:
                raise ScenarioError(
                    f"road {rid!r}: left endpoint attached to both "
                    f"{left_used[rid]!r} and {jc.junction_id!r}"
                )
            left_used[rid] = jc.junction_id
        A = np.array(jc.A, dtype=float)
        if A.shape != (m, n):
            raise ScenarioError(
                f"junction {jc.junction_id!r}: A has shape {A.shape}, expected ({m}, {n})"
            )
        colsums = A.sum(axis=0)
        for i, s in enumerate(colsums):
            if abs(s - 1.0) > 1e-12:
                raise ScenarioError(
                    f"junction {jc.junction_id!r}: column {i + 1} of A sums to {s}, expected 1"
                )
        if np.any(A < 0.0) or np.any(A > 1.0):
            raise ScenarioError(f"junction {jc.junction_id!r}: A entries must lie in [0, 1]")
        P = np.array(jc.P, dtype=float)
        if P.shape != (n,):
            raise ScenarioError(f"junction {jc.junction_id!r}: P must have {n} entries")
        if np.any(P <= 0.0):
            raise ScenarioError(f"junction {jc.junction_id!r}: priorities must be positive")
        if abs(P.sum() - 1.0) > 1e-12:
            raise ScenarioError(
                f"junction {jc.junction_id!r}: priorities sum to {P.sum()}, expected 1"
            )
    for rc in scenario.roads:
        if rc.left_boundary is not None and rc.road_id in left_used:
            raise ScenarioError(
                f"road {rc.road_id!r}: left endpoint has both a boundary and a junction"
            )
        if rc.right_boundary is not None and rc.road_id in right_used:
            raise ScenarioError(
                f"road {rc.road_id!r}: right endpoint has both a boundary and a junction"
            )


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path!r}: {exc}") from exc
    return parse_scenario(text)


def scenario_to_dict(scenario: Scenario) -> dict:
    doc = {
        "flux": scenario.flux,
        "solver": scenario.solver_choice,
        "T": scenario.T,
        "cfl_safety": scenario.cfl_safety,
        "sample_times": list(scenario.sample_times),
        "roads": [],
        "junctions": [],
    }
    if scenario.output_dir is not None:
        doc["output_dir"] = scenario.output_dir
    for rc in scenario.roads:
        entry = {
            "id": rc.road_id,
            "length": rc.length,
            "cells": rc.cells,
            "initial": [{"from": s[0], "to": s[1], "rho": s[2]} for s in rc.initial],
        }
        if rc.left_boundary is not None:
            entry["left_boundary"] = rc.left_boundary
        if rc.right_boundary is not None:
            entry["right_boundary"] = rc.right_boundary
        doc["roads"].append(entry)
    for jc in scenario.junctions:
        doc["junctions"].append(
            {
                "id": jc.junction_id,
                "incoming": list(jc.incoming),
                "outgoing": list(jc.outgoing),
                "A": [list(row) for row in jc.A],
                "P": list(jc.P),
            }
        )
    return doc


def serialize_scenario(scenario: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(scenario), sort_keys=False)


# -- builtin configurations ------------------------------------------

BUILTIN_NAMES = ("case1", "case2", "case3")


def builtin_scenario(name: str, cells: int = 100) -> Scenario:
    """The published single-junction configurations (quadratic flux)."""
    if name == "case1":
        A = [[0.6, 0.0], [0.4, 1.0]]
        P = [0.7, 0.3]
        data = [0.6, 0.2, 0.85, 0.2]
    elif name == "case2":
        A = [[0.5, 0.6], [0.5, 0.4]]
        P = [0.7, 0.3]
        data = [0.2, 0.6, 0.3, 0.8]
    elif name == "case3":
        A = [[0.5, 0.6, 0.2], [0.5, 0.4, 0.8]]
        P = [0.5, 0.3, 0.2]
        data = [0.2, 0.6, 0.3, 0.8, 0.2]
    else:
        raise ScenarioError(f"unknown builtin scenario {name!r}; expected one of {BUILTIN_NAMES}")
    n = len(P)
    m = len(A)
    roads = [
        RoadConfig(
            road_id=f"road{k + 1}",
            length=1.0,
            cells=cells,
            initial=[[0.0, 1.0, float(data[k])]],
        )
        for k in range(n + m)
    ]
    junction = JunctionConfig(
        junction_id="J",
        incoming=[f"road{k + 1}" for k in range(n)],
        outgoing=[f"road{n + k + 1}" for k in range(m)],
        A=A,
        P=P,
    )
    return Scenario(
        flux="quadratic",
        roads=roads,
        junctions=[junction],
        solver_choice="prs",
        T=1.0,
        cfl_safety=1.0,
        sample_times=[0.0, 0.25, 0.5, 0.75, 1.0],
    )


# -- network construction --------------------------------------------


def _cell_averages(segments, M: int, dx: float) -> np.ndarray:
    avg = np.zeros(M)
    for k in range(M):
        a, b = k * dx, (k + 1) * dx
        total = 0.0
        for x0, x1, rho in segments:
            lo, hi = max(a, x0), min(b, x1)
            if hi > lo:
                total += (hi - lo) * rho
        avg[k] = total / dx
    return avg


def build_network(scenario: Scenario, dx: float | None = None) -> Network:
    """Materialize grids and attachments; dx (if given) overrides cell counts."""
    model = scenario.flux_model()
    right_att: dict = {}
    left_att: dict = {}
    junctions = {}
    for jc in scenario.junctions:
        spec = jc.spec()
        junctions[jc.junction_id] = NetworkJunction(
            junction_id=jc.junction_id, spec=spec, incoming=list(jc.incoming), outgoing=list(jc.outgoing)
        )
        for slot, rid in enumerate(jc.incoming):
            right_att[rid] = JunctionAttach(jc.junction_id, "in", slot)
        for slot, rid in enumerate(jc.outgoing):
            left_att[rid] = JunctionAttach(jc.junction_id, "out", slot)

    roads = {}
    for rc in scenario.roads:
        M = rc.cells if dx is None else max(2, int(round(rc.length / dx)))
        cell_dx = rc.length / M
        rho = _cell_averages(rc.initial, M, cell_dx)
        la = left_att.get(rc.road_id)
        if la is None:
            value = rc.left_boundary if rc.left_boundary is not None else rc.initial[0][2]
            la = BoundaryAttach(float(value))
        ra = right_att.get(rc.road_id)
        if ra is None:
            value = rc.right_boundary if rc.right_boundary is not None else rc.initial[-1][2]
            ra = BoundaryAttach(float(value))
        roads[rc.road_id] = RoadGrid(
            road_id=rc.road_id, M=M, dx=cell_dx, rho=rho, left_attach=la, right_attach=ra
        )
    return Network(model=model, roads=roads, junctions=junctions)


def road_coordinates(scenario: Scenario, network: Network, road_id: str) -> np.ndarray:
    """Cell centers; roads feeding a junction are shifted to end at x = 0."""
    grid = network.roads[road_id]
    x = (np.arange(grid.M) + 0.5) * grid.dx
    if isinstance(grid.right_attach, JunctionAttach) and not isinstance(
        grid.left_attach, JunctionAttach
    ):
        x = x - grid.M * grid.dx
    return x


# -- results persistence ---------------------------------------------


def _atomic_write(path: str, write_fn) -> None:
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_results(trajectory: Trajectory, scenario: Scenario, network: Network, outdir: str) -> list:
    """Write per-road CSVs, per-junction CSVs and a reproduction manifest.

    Returns the list of paths written.
    """
    os.makedirs(outdir, exist_ok=True)
    written = []
    try:
        if trajectory.samples:
            for rid in network.roads:
                path = os.path.join(outdir, f"road_{rid}.csv")
                x = road_coordinates(scenario, network, rid)

                def write_road(fh, rid=rid, x=x):
                    w = csv.writer(fh)
                    w.writerow(["t", "x", "rho"])
                    for requested_t, _actual_t, state in trajectory.samples:
                        for xi, ri in zip(x, state[rid]):
                            w.writerow([_fmt(requested_t), _fmt(xi), _fmt(ri)])

                _atomic_write(path, write_road)
                written.append(path)
        for jid, junction in network.junctions.items():
            path = os.path.join(outdir, f"junction_{jid}.csv")
            n, m = junction.spec.n, junction.spec.m

            def write_junction(fh, jid=jid, n=n, m=m):
                w = csv.writer(fh)
                header = ["t", "dt", "Gamma", "hbar"]
                header += [f"q_in_{k + 1}" for k in range(n)]
                header += [f"q_out_{k + 1}" for k in range(m)]
                w.writerow(header)
                for rec in trajectory.records:
                    fx = rec.junction_fluxes[jid]
                    row = [_fmt(rec.t), _fmt(rec.dt), _fmt(fx.q_in.sum()), _fmt(fx.hbar)]
                    row += [_fmt(v) for v in fx.q_in]
                    row += [_fmt(v) for v in fx.q_out]
                    w.writerow(row)

            _atomic_write(path, write_junction)
            written.append(path)

        manifest_path = os.path.join(outdir, "manifest.yaml")

        def write_manifest(fh):
            from . import __version__

            doc = {
                "netlwr_version": __version__,
                "scenario": scenario_to_dict(scenario),
                "solver": scenario.solver_choice,
                "grid": {
                    rid: {"cells": g.M, "dx": g.dx} for rid, g in network.roads.items()
                },
            }
            yaml.safe_dump(doc, fh, sort_keys=False)

        _atomic_write(manifest_path, write_manifest)
        written.append(manifest_path)
    except OSError as exc:
        raise ScenarioError(f"failed writing results under {outdir!r}: {exc}") from exc
    return written
