import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from conftest import linear_velocity_state, static_state
from lagfree import diagnostics as dg
from lagfree.model import LagState, MassGrid, ProfileSpec, init_profile, make_params
from lagfree.solver import StepConfig, advance, run

C_PARABOLIC = 20.0 / 7.0


def rho_exact(r):
    return C_PARABOLIC * (1.2 - r * r)


def u_exact(r):
    return 0.3 * np.sin(0.5 * np.pi * r)


def du_exact(r):
    return 0.15 * np.pi * np.cos(0.5 * np.pi * r)


def smooth_state(n: int, tau: float = 0.0) -> LagState:
    p = make_params(2.0, 1.0, 2)
    s = init_profile(ProfileSpec(kind="parabolic"), p, MassGrid(n))
    return LagState(s.rho, u_exact(s.r), s.r, tau)


def radial(f, a=1.0):
    return quad(lambda r: f(r) * r, 0.0, a, epsabs=1e-14, epsrel=1e-13, limit=200)[0]


# exact functionals of the smooth d = 2 fields above (gamma = 2, mu = 1), by adaptive quadrature
ORACLES = {
    "e_kin": lambda: radial(lambda r: 0.5 * rho_exact(r) * u_exact(r) ** 2),
    "e_pot": lambda: radial(lambda r: rho_exact(r) ** 2),
    "dissipation": lambda: radial(lambda r: (2.0 + rho_exact(r)) * (du_exact(r) + u_exact(r) / r) ** 2),
    "h": lambda: radial(lambda r: (r - 1.5 * u_exact(r)) ** 2 * rho_exact(r)) + 2 * 1.5**2 * radial(
        lambda r: rho_exact(r) ** 2),
    "lp": lambda: radial(lambda r: rho_exact(r) ** 5),
    "rho_u3": lambda: radial(lambda r: rho_exact(r) * np.abs(u_exact(r)) ** 3),
    "div_l2": lambda: math.sqrt(radial(lambda r: (du_exact(r) + u_exact(r) / r) ** 2)),
}

EVALUATORS = {
    "e_kin": lambda s, p: dg.energy(s, p)[0],
    "e_pot": lambda s, p: dg.energy(s, p)[1],
    "dissipation": dg.dissipation_rate,
    "h": dg.h_functional,
    "lp": lambda s, p: dg.lp_density_norm(s, 5.0, p),
    "rho_u3": dg.rho_u_cubed,
    "div_l2": dg.div_l2,
}


class TestClosedForms:
    def test_energy_static(self, params2):
        e_kin, e_pot = dg.energy(static_state(256), params2)
        assert e_kin == 0.0
        assert e_pot == pytest.approx(2.0, abs=1e-12)

    def test_energy_linear_velocity(self, params2):
        assert dg.energy(linear_velocity_state(64), params2)[0] == pytest.approx(0.25, abs=1e-12)

    def test_dissipation(self, params2):
        assert dg.dissipation_rate(static_state(32), params2) == 0.0
        assert dg.dissipation_rate(linear_velocity_state(64), params2) == pytest.approx(8.0, abs=1e-12)

    def test_flux(self, params2):
        np.testing.assert_allclose(dg.effective_viscous_flux(static_state(64), params2), -4.0, atol=1e-12)
        np.testing.assert_allclose(dg.effective_viscous_flux(linear_velocity_state(64), params2), 4.0, atol=1e-11)
        assert dg.boundary_flux(static_state(64), params2) == pytest.approx(-4.0, abs=1e-12)

    def test_theta(self, params2):
        def theta(rho, mu):
            s = LagState(np.array([rho]), np.zeros(2), np.array([0.0, 1.0]))
            return dg.theta_field(s, make_params(2.0, mu, 2))[0]

        assert theta(2.0, 1.0) == pytest.approx(3.386294361, abs=1e-9)
        assert theta(1.0, 0.7) == 1.0
        assert theta(math.e, 1.0) == pytest.approx(4.718281828, abs=1e-9)

    def test_theta_rejects_nonpositive(self, params2):
        s = LagState(np.array([1.0, 0.0]), np.zeros(3), np.array([0.0, 0.5, 1.0]))
        with pytest.raises(ValueError, match="positive"):
            dg.theta_field(s, params2)

    def test_xi(self, params2):
        s = static_state(64)
        assert np.all(dg.xi_field(s, params2) == 0.0)
        ones = LagState(s.rho, np.ones_like(s.u), s.r)
        xi = dg.xi_field(ones, params2)
        np.testing.assert_allclose(xi, 2.0 * (s.r - 1.0), atol=1e-12)
        assert xi[0] == pytest.approx(-2.0, abs=1e-12) and xi[-1] == 0.0

    def test_h(self, params2):
        assert dg.h_functional(static_state(128), params2) == pytest.approx(4.5, abs=1e-12)
        assert dg.h_functional(linear_velocity_state(128), params2) == pytest.approx(4.0, abs=1e-12)

    def test_sup_velocity(self, params2):
        u_inf, norm, holds = dg.sup_velocity_check(linear_velocity_state(64), params2)
        assert u_inf == pytest.approx(1.0, abs=1e-12)
        assert norm == pytest.approx(math.sqrt(2.0), abs=1e-12)
        assert holds
        assert dg.sup_velocity_check(static_state(16), params2) == (0.0, 0.0, True)

    def test_lp(self, params2):
        assert dg.lp_density_norm(static_state(64), 5.0, params2) == pytest.approx(16.0, abs=1e-11)
        r = np.sqrt(np.linspace(0.0, 1.0, 33))
        unit = LagState(np.ones(32), np.zeros(33), r)
        assert dg.lp_density_norm(unit, 3.7, params2) == pytest.approx(0.5, abs=1e-14)
        with pytest.raises(ValueError, match="p must be"):
            dg.lp_density_norm(unit, 0.5, params2)

    def test_rho_u_cubed(self, params2):
        assert dg.rho_u_cubed(static_state(16), params2) == 0.0
        assert dg.rho_u_cubed(linear_velocity_state(64), params2) == pytest.approx(0.4, abs=1e-12)


class TestRefinement:
    @pytest.mark.parametrize("name", sorted(ORACLES))
    def test_second_order(self, name, params2):
        exact = ORACLES[name]()
        errs = [abs(EVALUATORS[name](smooth_state(n, tau=0.5), params2) - exact) for n in (32, 64, 128)]
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert errs[-1] < 1e-3 * max(abs(exact), 1.0)
        assert np.all(orders >= 1.8), orders

    def test_xi_second_order(self, params2):
        errs = []
        for n in (32, 64, 128):
            s = smooth_state(n)
            ref = np.array([-quad(lambda q: rho_exact(q) * u_exact(q), r, 1.0, epsabs=1e-14)[0] for r in s.r])
            errs.append(np.max(np.abs(dg.xi_field(s, params2) - ref)))
        assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5

    def test_dissipation_forms_agree(self, params2):
        # Eulerian form: (u_r + u/r) from the face values, r-centred differences
        s = smooth_state(256)
        rc = 0.5 * (s.r[1:] + s.r[:-1])
        div_e = np.diff(s.u) / np.diff(s.r) + 0.5 * (s.u[1:] + s.u[:-1]) / rc
        vol = 0.5 * np.diff(s.r**2)
        eulerian = np.sum((2.0 + s.rho) * div_e**2 * vol)
        assert dg.dissipation_rate(s, params2) == pytest.approx(eulerian, rel=1e-3)


class TestTransport:
    def test_static_limit_reports_pressure(self, params2):
        s = static_state(32)
        np.testing.assert_allclose(dg.transport_residual(s, s, 0.0, params2), 4.0, atol=1e-12)
        np.testing.assert_allclose(dg.transport_residual(s, s, 1e-3, params2), 4.0, atol=1e-12)

    def test_hand_computed_defect(self, params2):
        prev, nxt = static_state(32), linear_velocity_state(32)
        dt = 0.01
        # xi and the inertial integral both equal r^2 - 1 exactly for rho = 2, u = r
        faces = nxt.r**2 - 1.0
        centre = 0.5 * (faces[1:] + faces[:-1])
        expected = centre / dt + centre + 4.0
        np.testing.assert_allclose(dg.transport_residual(prev, nxt, dt, params2), expected, atol=1e-10)

    def test_first_order_under_refinement(self, params2):
        norms = []
        for n in (32, 64, 128):
            s = init_profile(ProfileSpec(kind="parabolic"), params2, MassGrid(n))
            dt = 0.05 / n
            for _ in range(int(round(0.5 / dt))):
                prev = s
                s, _ = advance(s, dt, StepConfig(), params2)
            norms.append(np.max(np.abs(dg.transport_residual(prev, s, dt, params2))))
        orders = np.log2(np.array(norms[:-1]) / np.array(norms[1:]))
        assert np.all(orders >= 1.0), orders


class TestRates:
    @pytest.mark.parametrize(
        "gamma, regime, a_exp, am_exp, log",
        # critical branch: 1 / (d gamma) = 1/3 at gamma = 1.5, d = 2
        [(2.0, dg.SUPERCRITICAL, 0.25, 0.25, False), (1.5, dg.CRITICAL, 1.0 / 3.0, 1.0 / 3.0, True),
         (1.2, dg.SUBCRITICAL, None, 1.0 / 6.0, False)],
    )
    def test_theoretical_rate(self, gamma, regime, a_exp, am_exp, log):
        v = dg.theoretical_rate(make_params(gamma, 1.0, 2))
        assert v.regime == regime and v.log_correction is log
        assert v.aM_exponent == pytest.approx(am_exp, abs=1e-12)
        assert (v.a_exponent is None) if a_exp is None else v.a_exponent == pytest.approx(a_exp)

    def test_critical_in_three_dimensions(self):
        v = dg.theoretical_rate(make_params(4.0 / 3.0, 1.0, 3))
        assert v.regime == dg.CRITICAL and v.aM_exponent == pytest.approx(0.25)

    @given(gamma=st.floats(1.01, 5.0), dim=st.sampled_from([2, 3]))
    def test_exponents_in_unit_interval(self, gamma, dim):
        v = dg.theoretical_rate(make_params(gamma, 1.0, dim))
        assert 0.0 < v.aM_exponent < 1.0
        assert v.a_exponent is None or 0.0 < v.a_exponent < 1.0

    def test_fit_exact_power_law(self):
        t = np.linspace(10.0, 100.0, 50)
        slope, res = dg.fit_growth_exponent(t, (1.0 + t) ** 0.25, 10.0)
        assert slope == pytest.approx(0.25, abs=1e-9)
        assert res < 1e-12

    def test_fit_constant(self):
        t = np.linspace(10.0, 100.0, 20)
        assert dg.fit_growth_exponent(t, np.full(20, 3.0), 10.0)[0] == pytest.approx(0.0, abs=1e-12)

    def test_fit_noisy(self):
        rng = np.random.default_rng(1234)
        t = np.linspace(10.0, 100.0, 50)
        v = (1.0 + t) ** 0.25 * (1.0 + 0.01 * rng.standard_normal(50))
        assert dg.fit_growth_exponent(t, v, 10.0)[0] == pytest.approx(0.25, abs=0.01)

    def test_fit_window(self):
        t = np.linspace(0.0, 100.0, 101)
        v = np.where(t < 10.0, 1.0, (1.0 + t) ** 0.5)
        assert dg.fit_growth_exponent(t, v, 10.0)[0] == pytest.approx(0.5, abs=1e-9)

    def test_fit_errors(self):
        with pytest.raises(ValueError, match="at least 8"):
            dg.fit_growth_exponent(np.linspace(10, 20, 7), np.ones(7), 10.0)
        with pytest.raises(ValueError, match="positive"):
            dg.fit_growth_exponent(np.linspace(10, 20, 9), np.zeros(9), 10.0)
        with pytest.raises(ValueError, match="length"):
            dg.fit_growth_exponent(np.ones(9), np.ones(8), 0.0)

    def test_running_max(self):
        np.testing.assert_array_equal(dg.running_max([1, 2, 3], [5, 4, 6]), [5, 5, 6])
        np.testing.assert_array_equal(dg.running_max([1, 2, 3], [1, 2, 3]), [1, 2, 3])
        with pytest.raises(ValueError, match="length"):
            dg.running_max([1, 2], [1])
        with pytest.raises(ValueError, match="non-decreasing"):
            dg.running_max([2, 1], [1, 1])

    @given(st.lists(st.floats(-1e6, 1e6), min_size=0, max_size=50))
    def test_running_max_brute_force(self, values):
        t = np.arange(len(values), dtype=float)
        expected = [max(values[: k + 1]) for k in range(len(values))]
        np.testing.assert_array_equal(dg.running_max(t, values), expected)


class TestTrajectoryMonitors:
    def test_path_ratio_initial_only(self, params2):
        traj = run(static_state(16), StepConfig(), params2, 0.0, 0.1)
        assert dg.path_density_ratio(traj) == (1.0, 1.0)

    def test_path_ratio_positive(self, params2):
        traj = run(static_state(32), StepConfig(), params2, 2.0, 0.1)
        hi, lo = dg.path_density_ratio(traj)
        assert 0.0 < lo < 1.0 <= hi

    def test_record_invariants(self, params2):
        traj = run(smooth_state(32), StepConfig(), params2, 1.0, 0.1)
        for rec in traj.records:
            v = np.array(rec.values())
            assert np.all(np.isfinite(v))
            assert rec.mass >= 0 and rec.e_pot >= 0 and rec.diss_rate >= 0
            assert rec.lp_rho >= 0 and rec.rho_u3 >= 0 and rec.rho_min > 0
            assert dg.sup_velocity_check(traj.states[traj.records.index(rec)], params2)[2]

    def test_record_columns(self):
        assert ",".join(dg.DiagnosticRecord.columns()) == (
            "tau,a,mass,e_kin,e_pot,diss_rate,diss_cum,h_value,u_max,div_l2,rho_max,rho_min,lp_rho,rho_u3,f_boundary")

    def test_positive_part_monitor(self, params2):
        assert dg.positive_part_monitor(static_state(16), params2) > 0.0
