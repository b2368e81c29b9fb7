"""Scenario parsing, validation, network building and result output."""

from __future__ import annotations

import csv
import os

import numpy as np
import pytest
import yaml

from netlwr.godunov import run
from netlwr.scenario import (
    ScenarioError,
    build_network,
    builtin_scenario,
    load_scenario,
    parse_scenario,
    serialize_scenario,
    write_results,
)

MINIMAL = """
flux: quadratic
solver: prs
T: 0.5
roads:
  - {id: a, length: 1.0, cells: 10, initial: 0.3}
  - {id: b, length: 1.0, cells: 10, initial: 0.1}
junctions:
  - id: J
    incoming: [a]
    outgoing: [b]
    A: [[1.0]]
    P: [1.0]
"""


class TestParsing:
    def test_minimal(self):
        sc = parse_scenario(MINIMAL)
        assert sc.solver_choice == "prs"
        assert sc.T == 0.5
        assert [r.road_id for r in sc.roads] == ["a", "b"]
        assert sc.junctions[0].spec().n == 1

    def test_round_trip(self):
        sc = parse_scenario(MINIMAL)
        again = parse_scenario(serialize_scenario(sc))
        assert again == sc

    def test_builtin_round_trip(self):
        for name in ("case1", "case2", "case3"):
            sc = builtin_scenario(name)
            assert parse_scenario(serialize_scenario(sc)) == sc

    def test_segment_initial(self):
        text = MINIMAL.replace(
            "initial: 0.3",
            "initial: [{from: 0.0, to: 0.5, rho: 0.2}, {from: 0.5, to: 1.0, rho: 0.8}]",
        )
        sc = parse_scenario(text)
        assert sc.road("a").initial == [[0.0, 0.5, 0.2], [0.5, 1.0, 0.8]]

    def test_invalid_yaml(self):
        with pytest.raises(ScenarioError, match="YAML"):
            parse_scenario("flux: [unclosed")

    def test_missing_field(self):
        with pytest.raises(ScenarioError, match="roads"):
            parse_scenario("flux: quadratic\njunctions: []\n")

    def test_unknown_path(self):
        with pytest.raises(ScenarioError, match="no-such-file"):
            load_scenario("/no-such-file.yaml")


class TestValidation:
    def test_bad_column_sum_names_junction(self):
        text = MINIMAL.replace("A: [[1.0]]", "A: [[0.9]]")
        with pytest.raises(ScenarioError, match="'J'"):
            parse_scenario(text)

    def test_bad_priorities(self):
        text = MINIMAL.replace("P: [1.0]", "P: [0.9]")
        with pytest.raises(ScenarioError, match="priorit"):
            parse_scenario(text)

    def test_unknown_road_reference(self):
        text = MINIMAL.replace("incoming: [a]", "incoming: [zzz]")
        with pytest.raises(ScenarioError, match="zzz"):
            parse_scenario(text)

    def test_duplicate_road_id(self):
        text = MINIMAL.replace("{id: b, ", "{id: a, ")
        with pytest.raises(ScenarioError, match="duplicate"):
            parse_scenario(text)

    def test_double_attachment(self):
        text = MINIMAL + """
  - id: K
    incoming: [a]
    outgoing: [b]
    A: [[1.0]]
    P: [1.0]
"""
        with pytest.raises(ScenarioError, match="right endpoint"):
            parse_scenario(text)

    def test_density_out_of_range(self):
        text = MINIMAL.replace("initial: 0.3", "initial: 1.3")
        with pytest.raises(ScenarioError, match="outside"):
            parse_scenario(text)

    def test_segments_must_cover_road(self):
        text = MINIMAL.replace(
            "initial: 0.3", "initial: [{from: 0.0, to: 0.4, rho: 0.2}]"
        )
        with pytest.raises(ScenarioError, match="segments"):
            parse_scenario(text)

    def test_unknown_solver(self):
        text = MINIMAL.replace("solver: prs", "solver: magic")
        with pytest.raises(ScenarioError, match="magic"):
            parse_scenario(text)

    def test_unknown_builtin(self):
        with pytest.raises(ScenarioError, match="case9"):
            builtin_scenario("case9")


class TestBuildNetwork:
    def test_shapes_and_attachments(self):
        net = build_network(builtin_scenario("case3", cells=40))
        assert len(net.roads) == 5
        assert net.roads["road1"].M == 40
        j = net.junctions["J"]
        assert j.incoming == ["road1", "road2", "road3"]
        assert j.outgoing == ["road4", "road5"]

    def test_dx_override(self):
        net = build_network(builtin_scenario("case1"), dx=1 / 200)
        assert all(g.M == 200 for g in net.roads.values())

    def test_cell_averages_exact_on_aligned_jump(self):
        text = MINIMAL.replace(
            "{id: a, length: 1.0, cells: 10, initial: 0.3}",
            "{id: a, length: 1.0, cells: 4, initial: "
            "[{from: 0.0, to: 0.5, rho: 0.2}, {from: 0.5, to: 1.0, rho: 0.8}]}",
        )
        net = build_network(parse_scenario(text))
        assert np.allclose(net.roads["a"].rho, [0.2, 0.2, 0.8, 0.8])

    def test_cell_averages_split_cell(self):
        text = MINIMAL.replace(
            "{id: a, length: 1.0, cells: 10, initial: 0.3}",
            "{id: a, length: 1.0, cells: 2, initial: "
            "[{from: 0.0, to: 0.75, rho: 0.4}, {from: 0.75, to: 1.0, rho: 0.0}]}",
        )
        net = build_network(parse_scenario(text))
        assert np.allclose(net.roads["a"].rho, [0.4, 0.2])


class TestWriteResults:
    def _run(self, tmp_path, name="case1"):
        scenario = builtin_scenario(name, cells=10)
        scenario.T = 0.1
        net = build_network(scenario)
        traj = run(net, "prs", scenario.T, sample_times=[0.0, 0.1])
        return scenario, net, traj, write_results(traj, scenario, net, str(tmp_path))

    def test_file_inventory(self, tmp_path):
        _, net, _, written = self._run(tmp_path)
        names = {os.path.basename(p) for p in written}
        assert names == {
            "road_road1.csv",
            "road_road2.csv",
            "road_road3.csv",
            "road_road4.csv",
            "junction_J.csv",
            "manifest.yaml",
        }

    def test_road_csv_contents(self, tmp_path):
        _, net, traj, _ = self._run(tmp_path)
        with open(tmp_path / "road_road1.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2 * 10  # two samples, ten cells
        assert {r["t"] for r in rows} == {"0", "0.10000000000000001"}
        # incoming road coordinates end just left of the junction at x = 0
        assert float(rows[0]["x"]) == pytest.approx(-0.95)
        assert float(rows[0]["rho"]) == pytest.approx(0.6)

    def test_junction_csv_contents(self, tmp_path):
        _, net, traj, _ = self._run(tmp_path)
        with open(tmp_path / "junction_J.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(traj.records)
        last = rows[-1]
        assert float(last["q_in_1"]) == pytest.approx(0.2125, abs=1e-12)
        assert float(last["Gamma"]) == pytest.approx(0.30357142857142855, abs=1e-12)

    def test_manifest_round_trip(self, tmp_path):
        scenario, _, _, _ = self._run(tmp_path)
        with open(tmp_path / "manifest.yaml") as fh:
            doc = yaml.safe_load(fh)
        from netlwr.scenario import scenario_from_dict

        assert scenario_from_dict(doc["scenario"]) == scenario

    def test_deterministic_bytes(self, tmp_path):
        d1, d2 = tmp_path / "one", tmp_path / "two"
        self._run(d1)
        self._run(d2)
        for name in os.listdir(d1):
            with open(d1 / name, "rb") as a, open(d2 / name, "rb") as b:
                assert a.read() == b.read(), name
