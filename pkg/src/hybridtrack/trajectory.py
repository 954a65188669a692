"""Reference trajectories and the attitude reference built from the thrust vector.

The position reference carries derivatives up to fourth order so that the
thrust-direction acceleration can be formed analytically. The attitude
reference stacks the desired thrust axis ``rho`` and the heading axis
``upsilon`` into ``R_d = [upsilon, rho x upsilon, rho]`` and differentiates
it twice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .attitude import cross3, skew
from .errors import DegenerateThrustError

E3 = np.array([0.0, 0.0, 1.0])
DEGENERATE_TOL = 1e-9


@dataclass(frozen=True)
class ReferenceSample:
    p_d: np.ndarray
    dp_d: np.ndarray
    ddp_d: np.ndarray
    d3p_d: np.ndarray
    d4p_d: np.ndarray
    nu_d: np.ndarray
    dnu_d: np.ndarray
    ddnu_d: np.ndarray
    psi_d: float = math.nan


@dataclass(frozen=True)
class TrajectoryConfig:
    """Reference selection.

    ``preset`` picks a built-in analytic reference. ``custom`` overrides it
    with any callable ``t -> ReferenceSample`` (it must be C^4 in position
    and C^2 in heading for the bounds to mean anything).
    """

    preset: str = "tilted_circle"
    frequency: float = 2.0 * math.pi / 15.0
    offset: Tuple[float, float, float] = (-3.0, 1.0, 4.5)
    yaw_amplitude: float = math.pi
    custom: Optional[Callable[[float], ReferenceSample]] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.frequency > 0.0:
            raise ValueError(f"trajectory frequency must be positive, got {self.frequency}")
        if self.custom is None and self.preset not in PRESETS:
            raise ValueError(f"unknown trajectory preset {self.preset!r}; choose from {sorted(PRESETS)}")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.frequency


def heading_derivatives(psi: float, dpsi: float, ddpsi: float):
    """Unit heading vector ``(cos psi, sin psi)`` and its first two derivatives."""
    c, s = math.cos(psi), math.sin(psi)
    nu = np.array([c, s])
    tangent = np.array([-s, c])
    dnu = dpsi * tangent
    ddnu = ddpsi * tangent - dpsi * dpsi * nu
    return nu, dnu, ddnu


def _heading_grid(psi, dpsi, ddpsi):
    c, s = np.cos(psi), np.sin(psi)
    nu = np.stack((c, s), axis=-1)
    tangent = np.stack((-s, c), axis=-1)
    dnu = dpsi[:, None] * tangent
    ddnu = ddpsi[:, None] * tangent - (dpsi * dpsi)[:, None] * nu
    return nu, dnu, ddnu


def _tilted_circle(ts: np.ndarray, cfg: TrajectoryConfig) -> dict:
    f = cfg.frequency
    ph = f * ts
    out = {}
    for n, name in enumerate(("p_d", "dp_d", "ddp_d", "d3p_d", "d4p_d")):
        shift = ph + n * math.pi / 2.0
        c, s = np.cos(shift), np.sin(shift)
        out[name] = f ** n * np.stack((c, s, c), axis=-1)
    out["p_d"] = out["p_d"] + np.asarray(cfg.offset, dtype=float)
    A = cfg.yaw_amplitude
    psi = A * np.sin(ph)
    out["psi_d"] = psi
    out["nu_d"], out["dnu_d"], out["ddnu_d"] = _heading_grid(psi, A * f * np.cos(ph), -A * f * f * np.sin(ph))
    return out


def _tilted_circle_at(t: float, cfg: TrajectoryConfig) -> ReferenceSample:
    # scalar twin of _tilted_circle, used on the simulation hot path
    f = cfg.frequency
    ph = f * t
    c, s = math.cos(ph), math.sin(ph)
    f2 = f * f
    ox, oy, oz = cfg.offset
    p_d = np.array([c + ox, s + oy, c + oz])
    dp_d = f * np.array([-s, c, -s])
    ddp_d = -f2 * np.array([c, s, c])
    d3p_d = f2 * f * np.array([s, -c, s])
    d4p_d = f2 * f2 * np.array([c, s, c])
    A = cfg.yaw_amplitude
    psi = A * s
    nu, dnu, ddnu = heading_derivatives(psi, A * f * c, -A * f2 * s)
    return ReferenceSample(p_d, dp_d, ddp_d, d3p_d, d4p_d, nu, dnu, ddnu, psi_d=psi)


def _hover(ts: np.ndarray, cfg: TrajectoryConfig) -> dict:
    n = len(ts)
    z = np.zeros((n, 3))
    out = {"p_d": np.tile(np.asarray(cfg.offset, dtype=float), (n, 1)),
           "dp_d": z, "ddp_d": z, "d3p_d": z, "d4p_d": z, "psi_d": np.zeros(n)}
    out["nu_d"], out["dnu_d"], out["ddnu_d"] = _heading_grid(np.zeros(n), np.zeros(n), np.zeros(n))
    return out


PRESETS = {
    "tilted_circle": _tilted_circle,
    "hover": _hover,
}

_FIELDS = ("p_d", "dp_d", "ddp_d", "d3p_d", "d4p_d", "nu_d", "dnu_d", "ddnu_d")


def sample_reference(ts, cfg: TrajectoryConfig) -> dict:
    """Evaluate the reference on a time grid; fields stacked along axis 0."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if cfg.custom is None:
        return PRESETS[cfg.preset](ts, cfg)
    samples = [cfg.custom(float(t)) for t in ts]
    out = {n: np.array([getattr(s, n) for s in samples]) for n in _FIELDS}
    out["psi_d"] = np.array([s.psi_d for s in samples])
    return out


def eval_reference(t: float, cfg: TrajectoryConfig) -> ReferenceSample:
    if t < 0.0:
        raise ValueError(f"reference time must be nonnegative, got {t}")
    if cfg.custom is not None:
        return cfg.custom(t)
    if cfg.preset == "tilted_circle":
        return _tilted_circle_at(float(t), cfg)
    grid = PRESETS[cfg.preset](np.array([float(t)]), cfg)
    return ReferenceSample(*(grid[n][0] for n in _FIELDS), psi_d=float(grid["psi_d"][0]))


@dataclass(frozen=True)
class AttitudeReference:
    R_d: np.ndarray
    omega_d: np.ndarray
    domega_d: np.ndarray
    rho: np.ndarray
    drho: np.ndarray
    ddrho: np.ndarray
    upsilon: np.ndarray
    dupsilon: np.ndarray
    ddupsilon: np.ndarray
    varpi: np.ndarray


def _normalized_with_derivatives(w, dw, ddw):
    r = float(np.linalg.norm(w))
    n = w / r
    P = np.eye(3) - np.outer(n, n)
    dn = P @ dw / r
    ddn = P @ ddw / r - 2.0 * float(n @ dw) * dn / r - float(dn @ dn) * n
    return n, dn, ddn


def thrust_direction(u, du, ddu):
    """Thrust axis ``u/|u|`` with first and second time derivatives."""
    u = np.asarray(u, dtype=float)
    if np.linalg.norm(u) < DEGENERATE_TOL:
        raise DegenerateThrustError(f"|u| = {np.linalg.norm(u):.3e} below {DEGENERATE_TOL}")
    return _normalized_with_derivatives(u, np.asarray(du, dtype=float), np.asarray(ddu, dtype=float))


def heading_projection(rho_triple, nu_triple):
    """Project the planar heading onto the plane orthogonal to ``rho``.

    Returns ``(varpi, upsilon, dupsilon, ddupsilon)``. The sign factor is
    held constant while differentiating; it cannot change along a feasible
    solution because the vertical thrust component stays positive.
    """
    rho, drho, ddrho = rho_triple
    nu, dnu, ddnu = nu_triple
    r3 = rho[2]
    if abs(r3) < DEGENERATE_TOL:
        raise DegenerateThrustError(f"vertical thrust component |e3.rho| = {abs(r3):.3e} too small")
    sgn = 1.0 if r3 > 0.0 else -1.0

    def stack(a3, b, c):
        # (a3 * b, -c) in R^3
        return np.array([a3 * b[0], a3 * b[1], -c])

    varpi = sgn * stack(r3, nu, rho[0] * nu[0] + rho[1] * nu[1])
    dvarpi = sgn * (stack(drho[2], nu, drho[0] * nu[0] + drho[1] * nu[1])
                    + stack(r3, dnu, rho[0] * dnu[0] + rho[1] * dnu[1]))
    ddvarpi = sgn * (stack(ddrho[2], nu, ddrho[0] * nu[0] + ddrho[1] * nu[1])
                     + 2.0 * stack(drho[2], dnu, drho[0] * dnu[0] + drho[1] * dnu[1])
                     + stack(r3, ddnu, rho[0] * ddnu[0] + rho[1] * ddnu[1]))
    upsilon, dupsilon, ddupsilon = _normalized_with_derivatives(varpi, dvarpi, ddvarpi)
    return varpi, upsilon, dupsilon, ddupsilon


def desired_rotation(rho, upsilon) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    upsilon = np.asarray(upsilon, dtype=float)
    err = max(abs(rho @ rho - 1.0), abs(upsilon @ upsilon - 1.0), abs(rho @ upsilon))
    if err > 1e-6:
        raise ValueError(f"rho and upsilon must be orthonormal (violation {err:.3e})")
    return np.column_stack((upsilon, cross3(rho, upsilon), rho))


def desired_omega(rho, drho, upsilon, dupsilon) -> np.ndarray:
    """Body angular velocity of ``R_d`` from ``R_d^T dR_d/dt``."""
    S = skew(rho)
    return np.array([upsilon @ S @ drho, upsilon @ drho, -(upsilon @ S @ dupsilon)])


def desired_omega_dot(rho, ddrho, upsilon, ddupsilon, omega_d) -> np.ndarray:
    w1, w2, w3 = omega_d
    S = skew(rho)
    gyro = np.array([w2 * w3, -w1 * w3, -w1 * w2])
    return gyro + np.array([upsilon @ S @ ddrho, upsilon @ ddrho, -(upsilon @ S @ ddupsilon)])


def attitude_reference(u, du, ddu, ref: ReferenceSample) -> AttitudeReference:
    """Full attitude reference from the thrust vector and its derivatives."""
    rho, drho, ddrho = thrust_direction(u, du, ddu)
    varpi, ups, dups, ddups = heading_projection((rho, drho, ddrho), (ref.nu_d, ref.dnu_d, ref.ddnu_d))
    R_d = desired_rotation(rho, ups)
    w = desired_omega(rho, drho, ups, dups)
    dw = desired_omega_dot(rho, ddrho, ups, ddups, w)
    return AttitudeReference(R_d, w, dw, rho, drho, ddrho, ups, dups, ddups, varpi)
