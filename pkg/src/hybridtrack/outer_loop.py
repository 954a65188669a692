"""Filtered saturated position loop.

The commanded acceleration is ``u = u_f + g e3 + ddp_d`` where ``u_f`` is the
output of two cascaded first-order filters driven by a smooth componentwise
saturation of a PD law on transformed coordinates ``(z1, z2)``. In those
coordinates the closed loop is a double integrator driven by the saturated
feedback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateThrustError
from .feasibility import Gains
from .trajectory import DEGENERATE_TOL, E3, ReferenceSample


@dataclass(frozen=True)
class FilterState:
    u_f: np.ndarray
    u_s: np.ndarray

    @staticmethod
    def zero() -> "FilterState":
        return FilterState(np.zeros(3), np.zeros(3))

    def as_array(self) -> np.ndarray:
        return np.concatenate((self.u_f, self.u_s))

    @staticmethod
    def from_array(x) -> "FilterState":
        x = np.asarray(x, dtype=float)
        return FilterState(x[:3].copy(), x[3:6].copy())


@dataclass(frozen=True)
class TransformedState:
    z1: np.ndarray
    z2: np.ndarray


@dataclass(frozen=True)
class OuterOutput:
    u: np.ndarray
    du: np.ndarray
    ddu: np.ndarray
    T: float
    rho: np.ndarray
    u_p_bar: np.ndarray


def sat_smooth(y, M: float) -> np.ndarray:
    """Componentwise ``M tanh(y / M)``."""
    if M <= 0.0:
        raise ValueError(f"saturation level must be positive, got {M}")
    return M * np.tanh(np.asarray(y, dtype=float) / M)


def log_cosh_integral(y, M: float) -> float:
    """Sum over components of the integral of ``sat_smooth`` from 0 to y_i."""
    y = np.abs(np.asarray(y, dtype=float)) / M
    # log cosh(x) = x + log1p(exp(-2x)) - log 2, stable for large x
    return float(M * M * np.sum(y + np.log1p(np.exp(-2.0 * y)) - math.log(2.0)))


def to_z(p_err, v_err, xf: FilterState, gains: Gains) -> TransformedState:
    kf, ks = gains.k_f, gains.k_s
    p_err = np.asarray(p_err, dtype=float)
    v_err = np.asarray(v_err, dtype=float)
    z1 = p_err + (1.0 / kf + 1.0 / ks) * v_err + xf.u_f / (ks * kf)
    z2 = v_err + xf.u_f / kf + xf.u_s / ks
    return TransformedState(z1, z2)


def from_z(z: TransformedState, xf: FilterState, gains: Gains):
    """Recover ``(p_err, v_err)`` from transformed coordinates and filter state."""
    kf, ks = gains.k_f, gains.k_s
    v_err = z.z2 - xf.u_f / kf - xf.u_s / ks
    p_err = z.z1 - (1.0 / kf + 1.0 / ks) * v_err - xf.u_f / (ks * kf)
    return p_err, v_err


def transform_matrix(gains: Gains) -> np.ndarray:
    """The 12x12 map from ``(p_err, v_err, u_f, u_s)`` to ``(z1, z2, u_f, u_s)``."""
    kf, ks = gains.k_f, gains.k_s
    I = np.eye(3)
    Z = np.zeros((3, 3))
    return np.block([
        [I, (1.0 / kf + 1.0 / ks) * I, I / (ks * kf), Z],
        [Z, I, I / kf, I / ks],
        [Z, Z, I, Z],
        [Z, Z, Z, I],
    ])


def primary_feedback(z: TransformedState, gains: Gains) -> np.ndarray:
    return -sat_smooth(gains.k_p * z.z1 + gains.k_v * z.z2, gains.M_p)


def filter_rhs(xf: FilterState, u_p_bar, gains: Gains) -> FilterState:
    du_f = -gains.k_f * (xf.u_f - xf.u_s)
    du_s = -gains.k_s * (xf.u_s - np.asarray(u_p_bar, dtype=float))
    return FilterState(du_f, du_s)


def compose_control(xf: FilterState, u_p_bar, ref: ReferenceSample, gains: Gains, m: float,
                    g: float) -> OuterOutput:
    """Acceleration command, its first two derivatives and thrust split.

    The second derivative needs the filter rate, hence ``u_p_bar``.
    """
    u = xf.u_f + g * E3 + ref.ddp_d
    n = float(np.linalg.norm(u))
    if n < DEGENERATE_TOL:
        raise DegenerateThrustError(f"|u| = {n:.3e} below {DEGENERATE_TOL}: thrust vanished")
    rate = filter_rhs(xf, u_p_bar, gains)
    du = rate.u_f + ref.d3p_d
    ddu = -gains.k_f * (rate.u_f - rate.u_s) + ref.d4p_d
    return OuterOutput(u, du, ddu, m * n, u / n, np.asarray(u_p_bar, dtype=float))


def lyapunov_v1(z: TransformedState, xf: FilterState, gains: Gains) -> float:
    kp, kv, M = gains.k_p, gains.k_v, gains.M_p
    a = kp * z.z1 + kv * z.z2
    vp = kp * float(z.z2 @ z.z2) + log_cosh_integral(a, M) + log_cosh_integral(kp * z.z1, M)
    vf = float(xf.u_f @ xf.u_f) / gains.k_f + float(xf.u_s @ xf.u_s) / gains.k_s
    return vp / kv + 0.5 * vf


def lyapunov_v1_gradient(z: TransformedState, xf: FilterState, gains: Gains):
    """Partial derivatives of ``lyapunov_v1`` with respect to ``z1`` and ``z2``."""
    kp, kv, M = gains.k_p, gains.k_v, gains.M_p
    s_a = sat_smooth(kp * z.z1 + kv * z.z2, M)
    s_b = sat_smooth(kp * z.z1, M)
    d_z1 = (kp * s_a + kp * s_b) / kv
    d_z2 = (2.0 * kp * z.z2 + kv * s_a) / kv
    return d_z1, d_z2
