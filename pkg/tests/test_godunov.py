"""Finite-volume engine tests: fluxes, CFL, invariance, conservation."""

from __future__ import annotations

import numpy as np
import pytest

from netlwr.flux import FluxModel
from netlwr.godunov import (
    BoundaryAttach,
    CFLViolationError,
    Network,
    RoadGrid,
    compute_dt,
    godunov_flux,
    run,
    step,
)
from netlwr.junction import solve_prs
from netlwr.scenario import build_network, builtin_scenario
from netlwr.traces import solver_equilibrium

model = FluxModel.quadratic()


def single_road(rho, dx=0.01, left=None, right=None):
    rho = np.asarray(rho, dtype=float)
    return Network(
        model=model,
        roads={
            "r": RoadGrid(
                road_id="r",
                M=len(rho),
                dx=dx,
                rho=rho,
                left_attach=BoundaryAttach(left if left is not None else rho[0]),
                right_attach=BoundaryAttach(right if right is not None else rho[-1]),
            )
        },
        junctions={},
    )


class TestNumericalFlux:
    def test_transcritical_jump(self):
        # equal fluxes across the jump: the interface passes f(0.2) = 0.16
        assert godunov_flux(model, 0.2, 0.8) == pytest.approx(0.16, abs=1e-15)

    def test_rarefaction_through_critical(self):
        # congested left of free: both bounds slack, sonic flux f_max
        assert godunov_flux(model, 0.8, 0.2) == pytest.approx(0.25, abs=1e-15)

    def test_constant_state(self):
        for u in (0.0, 0.3, 0.5, 0.9, 1.0):
            assert godunov_flux(model, u, u) == pytest.approx(model.eval(u), abs=1e-15)


class TestTimeStep:
    def test_dt_fast_characteristics(self):
        net = single_road(np.full(10, 0.0), dx=0.01)
        assert compute_dt(model, net.roads.values()) == pytest.approx(0.005)

    def test_dt_uses_boundary_values(self):
        net = single_road(np.full(10, 0.5), dx=0.01, left=0.0)
        assert compute_dt(model, net.roads.values()) == pytest.approx(0.005)

    def test_dt_critical_state_falls_back_to_lipschitz(self):
        net = single_road(np.full(10, 0.5), dx=0.01)
        assert compute_dt(model, net.roads.values()) == pytest.approx(0.005)

    def test_safety_factor(self):
        net = single_road(np.full(10, 0.0), dx=0.01)
        assert compute_dt(model, net.roads.values(), 0.5) == pytest.approx(0.0025)

    def test_cfl_violation_raises(self):
        net = single_road(np.full(10, 0.0), dx=0.01)
        with pytest.raises(CFLViolationError):
            step(net, solve_prs, dt=0.01)


class TestInvariance:
    def test_constant_state_is_invariant(self):
        net = single_road(np.full(20, 0.3))
        for _ in range(5):
            step(net, solve_prs, dt=compute_dt(model, net.roads.values()))
        assert np.max(np.abs(net.roads["r"].rho - 0.3)) == 0.0

    def test_junction_equilibrium_is_fixed_point(self):
        scenario = builtin_scenario("case1", cells=10)
        eq = solver_equilibrium(
            model,
            scenario.junctions[0].spec(),
            solve_prs,
            [0.6, 0.2, 0.85, 0.2],
        )
        for k, rc in enumerate(scenario.roads):
            rc.initial = [[0.0, 1.0, float(eq[k])]]
        net = build_network(scenario)
        before = {rid: g.rho.copy() for rid, g in net.roads.items()}
        step(net, solve_prs, dt=compute_dt(model, net.roads.values()))
        for rid, g in net.roads.items():
            assert np.max(np.abs(g.rho - before[rid])) <= 1e-14

    def test_case1_first_step_signs(self):
        net = build_network(builtin_scenario("case1", cells=20))
        step(net, solve_prs, dt=compute_dt(model, net.roads.values()))
        # road 2 may send only 0.0911 < f(0.2): density piles up at J
        assert net.roads["road2"].rho[-1] > 0.2
        # road 4 is fed 0.176 > f(0.2): its first cell fills toward 0.228
        assert net.roads["road4"].rho[0] > 0.2
        # road 3 absorbs exactly its datum's flux: unchanged
        assert np.max(np.abs(net.roads["road3"].rho - 0.85)) <= 1e-14

    def test_maximum_principle_random_data(self):
        rng = np.random.default_rng(30)
        net = single_road(rng.uniform(0.0, 1.0, 50), dx=0.02)
        traj = run(net, "prs", T=0.5)
        assert np.all(net.roads["r"].rho >= 0.0)
        assert np.all(net.roads["r"].rho <= 1.0)
        assert len(traj.records) > 0


class TestConservation:
    @pytest.mark.parametrize("name", ["case1", "case2", "case3"])
    @pytest.mark.parametrize("solver", ["prs", "sprs"])
    def test_mass_balance(self, name, solver):
        scenario = builtin_scenario(name, cells=50)
        net = build_network(scenario)
        traj = run(net, solver, T=0.5)
        for rid, road in net.roads.items():
            expect = (
                traj.initial_mass[rid]
                + traj.inflow_integral[rid]
                - traj.outflow_integral[rid]
            )
            assert road.mass() == pytest.approx(expect, rel=1e-10, abs=1e-12)

    def test_junction_flux_balance_every_step(self):
        net = build_network(builtin_scenario("case3", cells=40))
        traj = run(net, "prs", T=0.3)
        for rec in traj.records:
            fx = rec.junction_fluxes["J"]
            assert abs(fx.q_in.sum() - fx.q_out.sum()) <= 1e-12


class TestSampling:
    def test_samples_at_requested_times(self):
        net = build_network(builtin_scenario("case1", cells=20))
        traj = run(net, "prs", T=0.5, sample_times=[0.0, 0.25, 0.5])
        assert [s[0] for s in traj.samples] == [0.0, 0.25, 0.5]
        for requested, actual, state in traj.samples:
            assert actual >= requested - 1e-15
            assert set(state) == set(net.roads)

    def test_final_time_hit_exactly(self):
        net = build_network(builtin_scenario("case1", cells=20))
        traj = run(net, "prs", T=0.31)
        assert traj.records[-1].t == pytest.approx(0.31, abs=1e-12)
