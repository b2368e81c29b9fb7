"""Fundamental-diagram tests: evaluation, branches, derived maps."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from netlwr.flux import FluxDomainError, FluxModel, InfeasibleFluxError

model = FluxModel.quadratic()

densities = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
fluxvals = st.floats(min_value=0.0, max_value=0.25, allow_nan=False)


class TestQuadratic:
    def test_basics(self):
        assert model.eval(0.0) == 0.0
        assert model.eval(1.0) == 0.0
        assert model.eval(0.5) == 0.25
        assert model.rho_cr == 0.5
        assert model.f_max == 0.25
        assert model.lipschitz_bound == 1.0

    def test_known_values(self):
        assert model.eval(0.2) == pytest.approx(0.16, abs=1e-15)
        assert model.eval(0.85) == pytest.approx(0.1275, abs=1e-15)
        assert model.eval(0.6) == pytest.approx(0.24, abs=1e-15)

    def test_array_eval(self):
        out = model.eval(np.array([0.0, 0.5, 1.0]))
        assert np.allclose(out, [0.0, 0.25, 0.0])

    def test_domain_errors(self):
        with pytest.raises(FluxDomainError):
            model.eval(-0.1)
        with pytest.raises(FluxDomainError):
            model.eval(1.1)
        with pytest.raises(FluxDomainError):
            model.eval(np.array([0.5, 2.0]))

    def test_derivative(self):
        assert model.derivative(0.0) == 1.0
        assert model.derivative(0.5) == 0.0
        assert model.derivative(1.0) == -1.0

    @given(densities)
    def test_tau_involution(self, rho):
        assert model.tau(model.tau(rho)) == pytest.approx(rho, abs=1e-12)
        assert model.eval(model.tau(rho)) == pytest.approx(model.eval(rho), abs=1e-12)

    @given(fluxvals, st.sampled_from(["free", "congested"]))
    def test_inverse_round_trip(self, gamma, branch):
        rho = model.inverse(gamma, branch)
        assert model.eval(rho) == pytest.approx(gamma, abs=1e-10)
        if branch == "free":
            assert rho <= model.rho_cr + 1e-12
        else:
            assert rho >= model.rho_cr - 1e-12

    def test_inverse_infeasible(self):
        with pytest.raises(InfeasibleFluxError):
            model.inverse(0.26, "free")
        with pytest.raises(InfeasibleFluxError):
            model.inverse(-0.01, "free")

    @given(densities, densities)
    def test_demand_monotone(self, a, b):
        lo, hi = min(a, b), max(a, b)
        assert model.demand(lo) <= model.demand(hi) + 1e-15

    @given(densities, densities)
    def test_supply_antitone(self, a, b):
        lo, hi = min(a, b), max(a, b)
        assert model.supply(lo) >= model.supply(hi) - 1e-15

    @given(densities)
    def test_demand_supply_cap(self, rho):
        assert model.demand(rho) <= model.f_max + 1e-15
        assert model.supply(rho) <= model.f_max + 1e-15
        assert max(model.demand(rho), model.supply(rho)) == pytest.approx(
            model.f_max, abs=1e-15
        )

    def test_profiles_match_scalars(self):
        arr = np.linspace(0.0, 1.0, 17)
        assert np.allclose(model.demand_profile(arr), [model.demand(r) for r in arr])
        assert np.allclose(model.supply_profile(arr), [model.supply(r) for r in arr])


class TestTabulated:
    def make(self):
        pts = [(0.0, 0.0), (0.25, 0.15), (0.4, 0.2), (0.6, 0.19), (0.8, 0.12), (1.0, 0.0)]
        return FluxModel.from_table(pts)

    def test_interpolation(self):
        tab = self.make()
        assert tab.eval(0.25) == pytest.approx(0.15)
        assert tab.eval(0.5) == pytest.approx(0.195)
        assert tab.f_max == pytest.approx(0.2)
        assert tab.rho_cr == pytest.approx(0.4, abs=1e-6)

    def test_inverse_bisection(self):
        tab = self.make()
        for gamma in (0.0, 0.05, 0.1, 0.19):
            for branch in ("free", "congested"):
                rho = tab.inverse(gamma, branch)
                assert tab.eval(rho) == pytest.approx(gamma, abs=1e-10)

    def test_tau(self):
        tab = self.make()
        for rho in (0.1, 0.3, 0.7, 0.9):
            assert tab.eval(tab.tau(rho)) == pytest.approx(tab.eval(rho), abs=1e-10)

    def test_validation(self):
        with pytest.raises(ValueError):
            FluxModel.from_table([(0.0, 0.0), (1.0, 0.0)])
        with pytest.raises(ValueError):
            FluxModel.from_table([(0.0, 0.1), (0.5, 0.25), (1.0, 0.0)])
        with pytest.raises(ValueError):
            # convex kink
            FluxModel.from_table([(0.0, 0.0), (0.3, 0.05), (0.5, 0.25), (1.0, 0.0)])

    def test_config_round_trip(self):
        tab = self.make()
        again = FluxModel.from_config(tab.to_config())
        assert np.allclose(again.table_rho, tab.table_rho)
        assert np.allclose(again.table_f, tab.table_f)

    def test_quadratic_config(self):
        assert FluxModel.from_config("quadratic").kind == "quadratic"
        with pytest.raises(ValueError):
            FluxModel.from_config({"nope": 1})
