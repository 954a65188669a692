import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from hybridtrack.errors import InfeasibleConfigError
from hybridtrack.feasibility import (
    EnvelopeConstants,
    Gains,
    VehicleParams,
    analytic_envelope,
    audit,
    check_reference_feasibility,
    envelope_from_trajectory,
    filter_overshoot,
    impulse_response,
    reference_rate_bounds,
    thrust_bounds,
    torque_ceiling,
    torque_requirement,
    zero_crossing_time,
)
from hybridtrack.trajectory import TrajectoryConfig

F = 2 * math.pi / 15
ZERO_ENV = EnvelopeConstants(0, 0, 0, 0, 0, 0)
SCENARIO_ENV = envelope_from_trajectory(TrajectoryConfig())


def l1_norm(k_f, k_s):
    """Integral of |h| split at the sign change, by adaptive quadrature."""
    ts = zero_crossing_time(k_f, k_s)
    f = lambda t: abs(float(impulse_response(t, k_f, k_s)))
    return quad(f, 0, ts, epsabs=1e-13, epsrel=1e-13)[0] + quad(f, ts, np.inf, epsabs=1e-13, epsrel=1e-13)[0]


class TestFilterOvershoot:
    def test_scenario_gains(self):
        assert math.isclose(filter_overshoot(2, 20), 0.1 ** (1 / 9), rel_tol=1e-12)
        assert abs(filter_overshoot(2, 20) - 0.7743) < 1e-4

    def test_equal_gains(self):
        assert math.isclose(filter_overshoot(3, 3), math.exp(-1))

    def test_slow_filter_limit(self):
        assert abs(filter_overshoot(1e-6, 20) - 1) < 1e-5

    def test_fast_first_stage(self):
        # overshoot depends on which stage is slower
        assert filter_overshoot(20, 2) < filter_overshoot(2, 20)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            filter_overshoot(0, 1)

    def test_l1_identity_random_pairs(self):
        rng = np.random.default_rng(7)
        pairs = [(2.0, 20.0), (5.0, 5.0)] + [tuple(rng.uniform(0.2, 30, 2)) for _ in range(18)]
        for k_f, k_s in pairs:
            assert abs(l1_norm(k_f, k_s) - 2 * filter_overshoot(k_f, k_s)) < 1e-6

    def test_impulse_integrates_to_zero(self):
        assert abs(quad(lambda t: float(impulse_response(t, 2, 20)), 0, np.inf, limit=200)[0]) < 1e-9

    def test_zero_crossing(self):
        for k_f, k_s in ((2, 20), (4, 4), (7, 3)):
            assert abs(float(impulse_response(zero_crossing_time(k_f, k_s), k_f, k_s))) < 1e-12

    def test_impulse_matches_filter_simulation(self):
        # feed a unit impulse into the cascade and compare u_s - u_f
        k_f, k_s, dt = 2.0, 20.0, 1e-5
        uf, us = 0.0, k_s
        for _ in range(int(0.5 / dt)):
            uf, us = uf + dt * (-k_f * (uf - us)), us + dt * (-k_s * us)
        assert abs((us - uf) - float(impulse_response(0.5, k_f, k_s))) < 1e-3


class TestThrustBounds:
    def test_scenario(self):
        env = analytic_envelope(F, math.pi / 2)
        lo, hi = thrust_bounds(VehicleParams(), env, 2.0)
        assert abs(lo - 3.51) < 0.01 and abs(hi - 6.19) < 0.01

    def test_hover(self):
        veh = VehicleParams()
        lo, hi = thrust_bounds(veh, ZERO_ENV, 1e-300)
        assert math.isclose(lo, veh.m * veh.g) and math.isclose(hi, veh.m * veh.g)

    def test_saturation_too_large(self):
        with pytest.raises(InfeasibleConfigError):
            thrust_bounds(VehicleParams(), SCENARIO_ENV, 10.0)

    @given(st.floats(0.01, 9.0), st.floats(0.01, 9.0))
    def test_monotone_in_saturation(self, a, b):
        a, b = sorted((a, b))
        lo_a, hi_a = thrust_bounds(VehicleParams(), SCENARIO_ENV, a)
        lo_b, hi_b = thrust_bounds(VehicleParams(), SCENARIO_ENV, b)
        assert lo_b <= lo_a and hi_b >= hi_a


class TestReferenceRateBounds:
    def test_zero_envelope_vanishing_saturation(self):
        rep = reference_rate_bounds(ZERO_ENV, Gains(M_p=1e-12), VehicleParams())
        for name in ("U_du", "U_ddu", "U_drho", "U_ddrho", "U_omega_d", "U_domega_d"):
            assert getattr(rep, name) < 1e-9

    def test_derivative_bound_chain(self):
        rep = reference_rate_bounds(SCENARIO_ENV, Gains(), VehicleParams())
        assert math.isclose(rep.U_l, 0.1 ** (1 / 9))
        assert math.isclose(rep.U_du, 2 * math.sqrt(3) * 2 * rep.U_l * 2 + SCENARIO_ENV.K_j)

    def test_ball_mode_is_more_conservative(self):
        a = reference_rate_bounds(SCENARIO_ENV, Gains(), VehicleParams())
        b = reference_rate_bounds(SCENARIO_ENV, Gains(), VehicleParams(), arbitrary_filter_init=True)
        assert b.U_l == 1.0 and b.U_omega_d > a.U_omega_d and b.U_domega_d > a.U_domega_d


class TestTorque:
    def test_ceiling(self):
        assert abs(torque_ceiling(0.206, 0.045, 0.02) - 0.1501) < 1e-4
        assert math.isclose(torque_ceiling(0.206, 0.045, 0.02), 0.1500806, rel_tol=1e-6)

    def test_zero_requirement(self):
        rep = reference_rate_bounds(ZERO_ENV, Gains(M_p=1e-12), VehicleParams())
        rep.U_omega_d = rep.U_domega_d = 0.0
        iota, tau = torque_requirement(VehicleParams(), rep, 0.0, 0.0, 0.02)
        assert iota == 0 and not tau.any()

    def test_requirement_exceeds_ceiling(self):
        rep = audit(SCENARIO_ENV, Gains(), VehicleParams())
        assert all(t > rep.iota for t in rep.tau_required)


class TestReferenceFeasibility:
    def test_hover_passes(self):
        assert check_reference_feasibility(ZERO_ENV, VehicleParams()).ok

    def test_scenario_passes(self):
        assert check_reference_feasibility(SCENARIO_ENV, VehicleParams()).ok

    def test_vertical_acceleration_at_gravity_fails(self):
        env = EnvelopeConstants(0, 9.81, 0, 0, 0, 0)
        res = check_reference_feasibility(env, VehicleParams())
        assert not res.ok and "g > K_a3" in res.failures[0]

    def test_weak_motor_fails(self):
        assert not check_reference_feasibility(ZERO_ENV, VehicleParams(T_max_hw=4.0)).ok


class TestAudit:
    def test_scenario_thrust(self):
        rep = audit(SCENARIO_ENV, Gains(), VehicleParams())
        assert rep.reference_ok and rep.thrust_ok
        assert abs(rep.T_min - 3.51) < 0.01 and abs(rep.T_max - 6.19) < 0.01

    def test_large_saturation_recorded_not_raised(self):
        rep = audit(SCENARIO_ENV, Gains(M_p=10.0), VehicleParams())
        assert not rep.feasible and math.isnan(rep.T_min)
        assert any("M_p" in f for f in rep.failures)

    def test_tight_torque_limit(self):
        rep = audit(SCENARIO_ENV, Gains(), VehicleParams(tau_max_hw=(0.1, 0.1, 0.1)))
        assert not rep.torque_ok and len([f for f in rep.failures if "axis" in f]) == 3

    def test_items_are_flat(self):
        items = dict(audit(SCENARIO_ENV, Gains(), VehicleParams()).as_items())
        assert "tau_required_3" in items and "feasible" in items


class TestEnvelope:
    def test_matches_closed_form(self):
        a = analytic_envelope(F, math.pi)
        for name in ("K_a12", "K_a3", "K_j", "K_s", "K_dnu", "K_ddnu"):
            assert abs(getattr(SCENARIO_ENV, name) - getattr(a, name)) < 1e-6
            assert getattr(SCENARIO_ENV, name) >= getattr(a, name) - 1e-12

    def test_negative_constant_rejected(self):
        with pytest.raises(ValueError):
            EnvelopeConstants(-1, 0, 0, 0, 0, 0)

    def test_gain_validation(self):
        with pytest.raises(ValueError):
            Gains(alpha=1.0)
        with pytest.raises(ValueError):
            Gains(k_p=-1)
        with pytest.raises(ValueError):
            VehicleParams(J=(1, 0, 1))
