"""Saturated attitude tracking law on lifted MRP errors."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .attitude import skew
from .errors import MrpOutOfDiskError
from .feasibility import Gains


@dataclass(frozen=True)
class TorqueCommand:
    tau: np.ndarray
    tau_c: np.ndarray
    s_theta_out: np.ndarray
    s_omega_out: np.ndarray


def attitude_error(R, R_d, omega, omega_d) -> Tuple[np.ndarray, np.ndarray]:
    """``R_err = R_d^T R`` and ``omega_err = omega - R_err^T omega_d``."""
    R_err = np.asarray(R_d).T @ np.asarray(R)
    omega_err = np.asarray(omega, dtype=float) - R_err.T @ np.asarray(omega_d, dtype=float)
    return R_err, omega_err


def radial_sat(y, M: float) -> np.ndarray:
    """Direction-preserving saturation ``M y / sqrt(M^2 + |y|^2)``."""
    if M <= 0.0:
        raise ValueError(f"saturation level must be positive, got {M}")
    y = np.asarray(y, dtype=float)
    return M * y / math.sqrt(M * M + float(y @ y))


def feedforward(R_err, omega_d, domega_d, J) -> np.ndarray:
    J = np.asarray(J, dtype=float)
    if J.ndim == 1:
        J = np.diag(J)
    w = R_err.T @ np.asarray(omega_d, dtype=float)
    dw = R_err.T @ np.asarray(domega_d, dtype=float)
    return skew(J @ w) @ w - J @ dw


def torque(theta_err, omega_err, tau_c, gains: Gains) -> TorqueCommand:
    theta_err = np.asarray(theta_err, dtype=float)
    n2 = float(theta_err @ theta_err)
    limit = 1.0 + gains.delta
    if math.sqrt(n2) > limit * (1.0 + 1e-12):
        raise MrpOutOfDiskError(f"|theta_err| = {math.sqrt(n2):.12g} exceeds 1 + delta = {limit:.12g}")
    s_th = radial_sat(gains.k_theta * theta_err, gains.M_theta)
    s_om = radial_sat(gains.k_omega * np.asarray(omega_err, dtype=float), gains.M_omega)
    tau_c = np.asarray(tau_c, dtype=float)
    tau = -0.25 * (1.0 + n2) * s_th - s_om - tau_c
    return TorqueCommand(tau, tau_c, s_th, s_om)


# -- Lyapunov monitor ------------------------------------------------------

@dataclass(frozen=True)
class MonitorGains:
    a: float
    b: float
    sat_level: float


def _monitor_constants(gains: Gains, J):
    J = np.asarray(J, dtype=float)
    lam = np.linalg.eigvalsh(np.diag(J) if J.ndim == 1 else J)
    alpha = 1.0 + gains.delta
    beta = (1.0 + alpha ** 2) / 4.0
    gamma = gains.k_theta * gains.M_theta / math.sqrt(gains.M_theta ** 2 + (gains.k_theta * alpha) ** 2)
    return lam[0], lam[-1], alpha, beta, gamma


def monitor_gain_lower_bounds(gains: Gains, J, b: float = 1.0) -> Tuple[float, float, float, float]:
    """The four lower bounds on ``a`` that make the monitor a strict Lyapunov function."""
    lam_min, lam_max, alpha, beta, gamma = _monitor_constants(gains, J)
    M_star = gains.M_omega * lam_min
    k_th, k_om = gains.k_theta, gains.k_omega
    return (
        2.0 * k_om ** 2 / gamma * b,
        beta * lam_max * b,
        0.5 * b * k_om * lam_max / math.sqrt(gamma * lam_min),
        alpha / gains.delta * M_star / (2.0 * k_th) * b + 1.0 / (2.0 * k_th),
    )


def choose_monitor_gains(gains: Gains, J, margin: float = 1.01) -> MonitorGains:
    if gains.delta < 1e-6:
        raise ValueError(f"hysteresis margin delta = {gains.delta:g} too small for a finite monitor gain")
    b = 1.0
    a = margin * max(monitor_gain_lower_bounds(gains, J, b))
    lam_min = _monitor_constants(gains, J)[0]
    return MonitorGains(a, b, gains.M_omega * lam_min)


def lyapunov_v2(theta_err, omega_err, gains: Gains, J, mon: MonitorGains) -> float:
    J = np.asarray(J, dtype=float)
    if J.ndim == 1:
        J = np.diag(J)
    theta_err = np.asarray(theta_err, dtype=float)
    omega_err = np.asarray(omega_err, dtype=float)
    k_th, M = gains.k_theta, gains.M_theta
    y2 = k_th * k_th * float(theta_err @ theta_err)
    # M(sqrt(M^2 + y^2) - M) without cancellation
    radial = M * y2 / (math.sqrt(M * M + y2) + M)
    cross = float(theta_err @ radial_sat(gains.k_omega * J @ omega_err, mon.sat_level))
    return mon.a * float(omega_err @ J @ omega_err) + 2.0 * mon.a / k_th * radial + mon.b * cross
