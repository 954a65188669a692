import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation as ScipyRotation

from hybridtrack.attitude import (
    MRP_INF,
    is_inf,
    mrp_from_quat,
    mrp_norm,
    mrp_rate_matrix,
    nearest_lift,
    quat_dist,
    quat_multiply,
    quat_pair_from_rot,
    random_unit_quaternions,
    rot_from_euler_zyx,
    rot_from_mrp,
    rot_from_quat,
    shadow,
    skew,
)

finite = st.floats(-1.0, 1.0, allow_nan=False)
quats = st.tuples(finite, finite, finite, finite).filter(lambda q: np.linalg.norm(q) > 1e-3).map(
    lambda q: np.asarray(q) / np.linalg.norm(q))
mrps = st.tuples(*(st.floats(-5.0, 5.0, allow_nan=False),) * 3).map(np.asarray).filter(
    lambda v: np.linalg.norm(v) > 1e-6)


def scipy_matrix(q):
    # scipy stores the scalar last
    return ScipyRotation.from_quat([q[1], q[2], q[3], q[0]]).as_matrix()


class TestSkew:
    def test_basis_vector(self):
        np.testing.assert_array_equal(skew([1, 0, 0]), [[0, 0, 0], [0, 0, -1], [0, 1, 0]])

    def test_zero(self):
        np.testing.assert_array_equal(skew([0, 0, 0]), np.zeros((3, 3)))

    def test_cross_product(self):
        np.testing.assert_allclose(skew([1, 2, 3]) @ np.array([4, 5, 6]), [-3, 6, -3])


class TestRotFromQuat:
    def test_identity(self):
        np.testing.assert_array_equal(rot_from_quat([1, 0, 0, 0]), np.eye(3))

    def test_half_turn_about_x(self):
        np.testing.assert_allclose(rot_from_quat([0, 1, 0, 0]), np.diag([1, -1, -1]))

    def test_quarter_turn_about_x(self):
        h = math.sqrt(2) / 2
        np.testing.assert_allclose(rot_from_quat([h, h, 0, 0]), [[1, 0, 0], [0, 0, -1], [0, 1, 0]], atol=1e-15)

    @given(quats)
    def test_matches_independent_oracle(self, q):
        np.testing.assert_allclose(rot_from_quat(q), scipy_matrix(q), atol=1e-12)

    @given(quats)
    def test_sign_invariance_and_orthonormality(self, q):
        R = rot_from_quat(q)
        np.testing.assert_allclose(R, rot_from_quat(-q), atol=1e-15)
        assert np.linalg.norm(R.T @ R - np.eye(3)) < 1e-9
        assert abs(np.linalg.det(R) - 1.0) < 1e-9


class TestQuatPair:
    def test_identity(self):
        q, neg = quat_pair_from_rot(np.eye(3))
        np.testing.assert_array_equal(q, [1, 0, 0, 0])
        np.testing.assert_array_equal(neg, [-1, 0, 0, 0])

    def test_half_turn(self):
        q, neg = quat_pair_from_rot(np.diag([1.0, -1.0, -1.0]))
        np.testing.assert_allclose(q, [0, 1, 0, 0])
        np.testing.assert_allclose(neg, [0, -1, 0, 0])

    def test_round_trip_1000_samples(self, rng):
        for q in random_unit_quaternions(1000, rng):
            a, b = quat_pair_from_rot(rot_from_quat(q))
            assert min(np.abs(a - q).max(), np.abs(b - q).max()) < 1e-9

    def test_near_pi_precision(self):
        eps = 1e-9
        q = np.array([eps, 0.6, 0.0, 0.8])
        q /= np.linalg.norm(q)
        a, _ = quat_pair_from_rot(rot_from_quat(q))
        assert min(np.abs(a - q).max(), np.abs(a + q).max()) < 1e-12

    def test_rejects_non_rotation(self):
        with pytest.raises(ValueError):
            quat_pair_from_rot(np.diag([1.0, 1.0, 1.1]))
        with pytest.raises(ValueError):
            quat_pair_from_rot(np.diag([1.0, 1.0, -1.0]))


class TestMrp:
    def test_identity_quaternion(self):
        np.testing.assert_array_equal(mrp_from_quat([1, 0, 0, 0]), [0, 0, 0])

    def test_half_turn(self):
        np.testing.assert_array_equal(mrp_from_quat([0, 1, 0, 0]), [1, 0, 0])

    def test_antipode_is_infinity(self):
        assert mrp_from_quat([-1, 0, 0, 0]) is MRP_INF
        assert mrp_from_quat([-1 + 1e-13, 0, 0, 0]) is MRP_INF
        assert mrp_norm(MRP_INF) == math.inf

    def test_shadow_examples(self):
        np.testing.assert_array_equal(shadow(np.array([1.0, 0, 0])), [-1, 0, 0])
        np.testing.assert_array_equal(shadow(np.array([2.0, 0, 0])), [-0.5, 0, 0])
        assert is_inf(shadow(np.zeros(3)))
        np.testing.assert_array_equal(shadow(MRP_INF), np.zeros(3))

    @given(mrps)
    def test_shadow_involution_and_norm(self, v):
        np.testing.assert_allclose(shadow(shadow(v)), v, rtol=1e-12, atol=1e-12)
        assert math.isclose(mrp_norm(shadow(v)), 1.0 / np.linalg.norm(v), rel_tol=1e-12)

    @given(mrps)
    def test_rotation_shadow_equality(self, v):
        np.testing.assert_allclose(rot_from_mrp(v), rot_from_mrp(shadow(v)), atol=1e-12)

    def test_rot_from_mrp_special_points(self):
        np.testing.assert_array_equal(rot_from_mrp(np.zeros(3)), np.eye(3))
        np.testing.assert_array_equal(rot_from_mrp(MRP_INF), np.eye(3))

    def test_composition_1000_samples(self, rng):
        for q in random_unit_quaternions(1000, rng):
            np.testing.assert_allclose(rot_from_mrp(mrp_from_quat(q)), rot_from_quat(q), atol=1e-9)

    def test_quarter_turn_gives_tan_eighth(self):
        h = math.sqrt(2) / 2
        np.testing.assert_allclose(mrp_from_quat([h, h, 0, 0]), [math.tan(math.pi / 8), 0, 0])


class TestRateMatrix:
    def test_origin(self):
        np.testing.assert_array_equal(mrp_rate_matrix(np.zeros(3)), np.eye(3) / 4)

    def test_unit_axis(self):
        T = mrp_rate_matrix(np.array([1.0, 0, 0]))
        assert T[0, 0] == 0.5
        np.testing.assert_allclose(T, 0.25 * (2 * np.outer([1, 0, 0], [1, 0, 0]) + 2 * skew([1, 0, 0])))

    @given(mrps)
    def test_row_identity(self, v):
        lhs = v @ mrp_rate_matrix(v)
        rhs = 0.25 * (1 + v @ v) * v
        assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, float(v @ v) * np.linalg.norm(v))

    def test_infinity_rejected(self):
        with pytest.raises(ValueError):
            mrp_rate_matrix(MRP_INF)

    def test_matches_quaternion_kinematics(self, rng):
        # d/dt of the MRP of q(t) under body rate w, by central differences
        for q in random_unit_quaternions(50, rng):
            if q[0] < -0.5:
                q = -q
            w = rng.standard_normal(3)
            h = 1e-6

            def mrp_at(s):
                qs = q + s * 0.5 * quat_multiply(q, np.concatenate(([0.0], w)))
                return mrp_from_quat(qs / np.linalg.norm(qs))

            fd = (mrp_at(h) - mrp_at(-h)) / (2 * h)
            np.testing.assert_allclose(mrp_rate_matrix(mrp_from_quat(q)) @ w, fd, atol=1e-6)


class TestLifting:
    def test_distance_examples(self):
        assert quat_dist([1, 0, 0, 0], np.eye(3)) == 0.0
        assert quat_dist([0, 1, 0, 0], np.eye(3)) == 1.0

    @given(quats)
    def test_self_distance(self, q):
        assert quat_dist(q, rot_from_quat(q)) < 1e-9

    def test_nearest_lift_examples(self):
        np.testing.assert_array_equal(nearest_lift([1, 0, 0, 0], np.eye(3)), [1, 0, 0, 0])
        qh = np.array([-0.9, 0.1, 0.1, 0.1])
        qh /= np.linalg.norm(qh)
        np.testing.assert_array_equal(nearest_lift(qh, np.eye(3)), [-1, 0, 0, 0])

    @given(quats, quats)
    def test_nearest_lift_is_argmax(self, qh, q):
        R = rot_from_quat(q)
        best = nearest_lift(qh, R)
        a, b = quat_pair_from_rot(R)
        assert qh @ best == max(qh @ a, qh @ b)
        assert qh @ best >= 0.0

    def test_tie_break_is_canonical(self):
        # q_hat orthogonal to both lifts of the identity
        np.testing.assert_array_equal(nearest_lift([0, 1, 0, 0], np.eye(3)), [1, 0, 0, 0])


class TestEuler:
    def test_matches_independent_oracle(self):
        angles = np.radians([-179.0, 0.0, 100.0])
        R = rot_from_euler_zyx(*angles)
        ref = ScipyRotation.from_euler("ZYX", angles[::-1]).as_matrix()
        np.testing.assert_allclose(R, ref, atol=1e-14)

    def test_downward_start_points_thrust_down(self):
        R = rot_from_euler_zyx(*np.radians([-179.0, 0.0, 100.0]))
        assert R[2, 2] < -0.99
