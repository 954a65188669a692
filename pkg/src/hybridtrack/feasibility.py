"""Closed-form a-priori bounds and the feasibility audit.

Two bound chains coexist here. The ideal chain uses only the trajectory
envelope and is what the reference feasibility check compares against the
hardware. The filter-aware chain also accounts for the filtered saturated
position loop and feeds the thrust and torque ceilings used at runtime.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .errors import InfeasibleConfigError


@dataclass(frozen=True)
class EnvelopeConstants:
    """Suprema of the reference signals along the trajectory."""

    K_a12: float
    K_a3: float
    K_j: float
    K_s: float
    K_dnu: float
    K_ddnu: float

    def __post_init__(self):
        for name, val in asdict(self).items():
            if not (val >= 0.0 and math.isfinite(val)):
                raise ValueError(f"envelope constant {name} must be finite and nonnegative, got {val}")


@dataclass(frozen=True)
class VehicleParams:
    m: float = 0.46
    g: float = 9.81
    J: Tuple[float, float, float] = (2.24e-3, 2.9e-3, 5.3e-3)
    T_max_hw: float = 7.0
    tau_max_hw: Tuple[float, float, float] = (0.5, 0.5, 0.5)

    def __post_init__(self):
        if not self.m > 0.0:
            raise ValueError(f"mass must be positive, got {self.m}")
        if not self.g > 0.0:
            raise ValueError(f"gravity must be positive, got {self.g}")
        if len(self.J) != 3 or min(self.J) <= 0.0:
            raise ValueError(f"inertia diagonal must be three positive entries, got {self.J}")
        if not self.T_max_hw > 0.0:
            raise ValueError(f"thrust limit must be positive, got {self.T_max_hw}")
        if len(self.tau_max_hw) != 3 or min(self.tau_max_hw) <= 0.0:
            raise ValueError(f"torque limits must be three positive entries, got {self.tau_max_hw}")

    @property
    def J_matrix(self) -> np.ndarray:
        return np.diag(np.asarray(self.J, dtype=float))


@dataclass(frozen=True)
class Gains:
    """Position and attitude loop parameters."""

    k_p: float = 9.0
    k_v: float = 6.0
    k_f: float = 2.0
    k_s: float = 20.0
    M_p: float = 2.0
    k_theta: float = 100.0
    k_omega: float = 0.1
    M_theta: float = 0.206
    M_omega: float = 0.045
    delta: float = 0.02
    alpha: float = 0.25

    def __post_init__(self):
        for name in ("k_p", "k_v", "k_f", "k_s", "M_p", "k_theta", "k_omega", "M_theta", "M_omega", "delta"):
            val = getattr(self, name)
            if not (val > 0.0 and math.isfinite(val)):
                raise ValueError(f"gain {name} must be positive and finite, got {val}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"hysteresis margin alpha must lie in (0, 1), got {self.alpha}")


@dataclass
class BoundsReport:
    U_l: float = math.nan
    U_du: float = math.nan
    U_ddu: float = math.nan
    U_drho: float = math.nan
    U_ddrho: float = math.nan
    L_varpi: float = math.nan
    U_dvarpi: float = math.nan
    U_ddvarpi: float = math.nan
    U_dupsilon: float = math.nan
    U_ddupsilon: float = math.nan
    U_omega_d: float = math.nan
    U_domega_d: float = math.nan
    T_min: float = math.nan
    T_max: float = math.nan
    iota: float = math.nan
    tau_required: Tuple[float, float, float] = (math.nan, math.nan, math.nan)
    reference_ok: bool = False
    torque_ok: bool = False
    thrust_ok: bool = False
    arbitrary_filter_init: bool = False
    ideal: Dict[str, float] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.reference_ok and self.torque_ok and self.thrust_ok

    def as_items(self) -> List[Tuple[str, object]]:
        """Flat ordered key/value pairs for text reports."""
        items: List[Tuple[str, object]] = []
        for name in ("U_l", "U_du", "U_ddu", "U_drho", "U_ddrho", "L_varpi", "U_dvarpi", "U_ddvarpi",
                     "U_dupsilon", "U_ddupsilon", "U_omega_d", "U_domega_d", "T_min", "T_max", "iota"):
            items.append((name, getattr(self, name)))
        for i, v in enumerate(self.tau_required, start=1):
            items.append((f"tau_required_{i}", v))
        for name, v in self.ideal.items():
            items.append((f"ideal_{name}", v))
        items += [
            ("filter_init_mode", "ball" if self.arbitrary_filter_init else "zero"),
            ("reference_ok", self.reference_ok),
            ("thrust_ok", self.thrust_ok),
            ("torque_ok", self.torque_ok),
            ("feasible", self.feasible),
        ]
        return items


# -- filter impulse response ------------------------------------------------

def filter_overshoot(k_f: float, k_s: float) -> float:
    """Peak of the filter step response, half the L1 norm of ``impulse_response``."""
    if k_f <= 0.0 or k_s <= 0.0:
        raise ValueError("filter gains must be positive")
    if k_f == k_s:
        return math.exp(-1.0)
    r = k_f / k_s
    return math.exp(k_f / (k_s - k_f) * math.log(r))


def impulse_response(t, k_f: float, k_s: float):
    """Impulse response of the map from the saturated feedback to ``u_s - u_f``.

    Its integral over time is zero and its L1 norm is ``2 * filter_overshoot``.
    """
    t = np.asarray(t, dtype=float)
    if k_f == k_s:
        return k_f * (1.0 - k_f * t) * np.exp(-k_f * t)
    return k_s / (k_s - k_f) * (k_s * np.exp(-k_s * t) - k_f * np.exp(-k_f * t))


def zero_crossing_time(k_f: float, k_s: float) -> float:
    if k_f == k_s:
        return 1.0 / k_f
    return math.log(k_s / k_f) / (k_s - k_f)


# -- thrust and torque -----------------------------------------------------

def _check_saturation_level(veh: VehicleParams, env: EnvelopeConstants, M_p: float) -> None:
    if M_p >= veh.g - env.K_a3:
        raise InfeasibleConfigError(
            f"M_p >= g - K_a3 ({M_p:.6g} >= {veh.g - env.K_a3:.6g}): thrust lower bound is not positive"
        )


def thrust_bounds(veh: VehicleParams, env: EnvelopeConstants, M_p: float) -> Tuple[float, float]:
    _check_saturation_level(veh, env, M_p)
    T_min = veh.m * (veh.g - M_p - env.K_a3)
    T_max = veh.m * (math.sqrt(3.0) * M_p + math.hypot(env.K_a12, env.K_a3 + veh.g))
    return T_min, T_max


def reference_rate_bounds(env: EnvelopeConstants, gains: Gains, veh: VehicleParams,
                  arbitrary_filter_init: bool = False) -> BoundsReport:
    """Filter-aware bounds on the attitude reference and its derivatives.

    With ``arbitrary_filter_init`` the overshoot factor is replaced by 1,
    which covers filter states started anywhere in the M_p box.
    """
    T_min, T_max = thrust_bounds(veh, env, gains.M_p)
    k_f, k_s, M_p = gains.k_f, gains.k_s, gains.M_p
    U_l = 1.0 if arbitrary_filter_init else filter_overshoot(k_f, k_s)
    s3 = 2.0 * math.sqrt(3.0)
    U_du = s3 * k_f * U_l * M_p + env.K_j
    U_ddu = s3 * k_f * M_p * (k_f * U_l + k_s) + env.K_s

    U_drho = veh.m * U_du / T_min
    U_ddrho = veh.m * U_ddu / T_min + 3.0 * U_drho ** 2

    a = T_min / veh.m
    L_varpi = a / math.sqrt(a * a + 2.0 * M_p ** 2 + env.K_a12 ** 2 + 2.0 * math.sqrt(2.0) * M_p * env.K_a12)
    U_dvarpi = U_drho + env.K_dnu
    U_ddvarpi = U_ddrho + 2.0 * U_drho * env.K_dnu + env.K_ddnu
    U_dups = U_dvarpi / L_varpi
    U_ddups = U_ddvarpi / L_varpi + 3.0 * U_dups ** 2

    U_wd = math.hypot(U_drho, U_dups)
    U_dwd = U_drho * U_dups + math.hypot(U_ddrho, U_ddups)
    return BoundsReport(
        U_l=U_l, U_du=U_du, U_ddu=U_ddu, U_drho=U_drho, U_ddrho=U_ddrho, L_varpi=L_varpi,
        U_dvarpi=U_dvarpi, U_ddvarpi=U_ddvarpi, U_dupsilon=U_dups, U_ddupsilon=U_ddups,
        U_omega_d=U_wd, U_domega_d=U_dwd, T_min=T_min, T_max=T_max,
        arbitrary_filter_init=arbitrary_filter_init,
    )


def torque_ceiling(M_theta: float, M_omega: float, delta: float) -> float:
    """Componentwise bound on the feedback part of the torque law."""
    return (1.0 + (1.0 + delta) ** 2) * M_theta / 4.0 + M_omega


def _per_axis_torque(J, U_w: float, U_dw: float, extra: float) -> np.ndarray:
    J = np.asarray(J, dtype=float)
    out = np.empty(3)
    for i in range(3):
        j, k = [n for n in range(3) if n != i]
        out[i] = J[i] * U_dw + 0.5 * abs(J[j] - J[k]) * U_w ** 2 + extra
    return out


def torque_requirement(veh: VehicleParams, bounds: BoundsReport, M_theta: float, M_omega: float,
                       delta: float) -> Tuple[float, np.ndarray]:
    iota = torque_ceiling(M_theta, M_omega, delta)
    return iota, _per_axis_torque(veh.J, bounds.U_omega_d, bounds.U_domega_d, iota)


# -- reference feasibility ---------------------------------------------------

@dataclass
class ReferenceFeasibility:
    ok: bool
    constants: Dict[str, float]
    failures: List[str]


def check_reference_feasibility(env: EnvelopeConstants, veh: VehicleParams) -> ReferenceFeasibility:
    """Filter-free feasibility of the reference against the hardware."""
    failures: List[str] = []
    g = veh.g
    if not g > env.K_a3:
        failures.append(f"g > K_a3 violated ({g:.6g} <= {env.K_a3:.6g})")
        return ReferenceFeasibility(False, {}, failures)
    T_need = veh.m * (g + math.hypot(env.K_a12, env.K_a3))
    if not veh.T_max_hw > T_need:
        failures.append(f"thrust limit {veh.T_max_hw:.6g} N not above m(g + |K_a|) = {T_need:.6g} N")

    gap = g - env.K_a3
    U_drho = env.K_j / gap
    U_ddrho = env.K_s / gap + 3.0 * U_drho ** 2
    L = gap / math.hypot(env.K_a12, gap)
    U_dups = (U_drho + env.K_dnu) / L
    U_ddups = (U_ddrho + env.K_ddnu + 2.0 * U_drho * env.K_dnu) / L + 3.0 * U_dups ** 2
    U_wd = math.hypot(U_drho, U_dups)
    U_dwd = U_drho * U_dups + math.hypot(U_ddrho, U_ddups)
    tau_need = _per_axis_torque(veh.J, U_wd, U_dwd, 0.0)
    for i in range(3):
        if not veh.tau_max_hw[i] > tau_need[i]:
            failures.append(
                f"axis {i + 1}: torque limit {veh.tau_max_hw[i]:.6g} N m not above {tau_need[i]:.6g} N m"
            )
    consts = {
        "T_needed": T_need, "U_drho": U_drho, "U_ddrho": U_ddrho, "L": L,
        "U_dupsilon": U_dups, "U_ddupsilon": U_ddups, "U_omega_d": U_wd, "U_domega_d": U_dwd,
        "tau_needed_1": float(tau_need[0]), "tau_needed_2": float(tau_need[1]),
        "tau_needed_3": float(tau_need[2]),
    }
    return ReferenceFeasibility(not failures, consts, failures)


def audit(env: EnvelopeConstants, gains: Gains, veh: VehicleParams,
          arbitrary_filter_init: bool = False) -> BoundsReport:
    """Full feasibility report.

    Never raises for infeasible saturation levels; the failure is recorded
    in ``failures`` and the dependent bounds stay NaN.
    """
    ref_check = check_reference_feasibility(env, veh)
    try:
        rep = reference_rate_bounds(env, gains, veh, arbitrary_filter_init)
    except InfeasibleConfigError as exc:
        rep = BoundsReport(arbitrary_filter_init=arbitrary_filter_init)
        rep.reference_ok = ref_check.ok
        rep.ideal = ref_check.constants
        rep.failures = ref_check.failures + [str(exc)]
        return rep
    iota, tau_req = torque_requirement(veh, rep, gains.M_theta, gains.M_omega, gains.delta)
    rep.iota = iota
    rep.tau_required = tuple(float(x) for x in tau_req)
    rep.reference_ok = ref_check.ok
    rep.ideal = ref_check.constants
    rep.failures = list(ref_check.failures)
    rep.thrust_ok = rep.T_max < veh.T_max_hw
    if not rep.thrust_ok:
        rep.failures.append(f"thrust ceiling {rep.T_max:.6g} N not below limit {veh.T_max_hw:.6g} N")
    over = [i for i in range(3) if not tau_req[i] < veh.tau_max_hw[i]]
    rep.torque_ok = not over
    for i in over:
        rep.failures.append(
            f"axis {i + 1}: torque ceiling {tau_req[i]:.6g} N m not below limit {veh.tau_max_hw[i]:.6g} N m"
        )
    return rep


# -- envelope extraction ---------------------------------------------------

def envelope_from_trajectory(traj_cfg, n_samples: int = 100_000, round_up: float = 1e-9) -> EnvelopeConstants:
    """Sample derivative norms over one period and take the maxima."""
    from .trajectory import sample_reference

    ts = np.linspace(0.0, traj_cfg.period, n_samples, endpoint=False)
    r = sample_reference(ts, traj_cfg)
    vals = (
        np.hypot(r["ddp_d"][:, 0], r["ddp_d"][:, 1]).max(),
        np.abs(r["ddp_d"][:, 2]).max(),
        np.linalg.norm(r["d3p_d"], axis=1).max(),
        np.linalg.norm(r["d4p_d"], axis=1).max(),
        np.linalg.norm(r["dnu_d"], axis=1).max(),
        np.linalg.norm(r["ddnu_d"], axis=1).max(),
    )
    return EnvelopeConstants(*(float(x) + round_up for x in vals))


def analytic_envelope(frequency: float, yaw_amplitude: float) -> EnvelopeConstants:
    """Closed-form envelope of the tilted-circle preset, for cross-checks."""
    f = frequency
    A = yaw_amplitude
    # |dnu| = A f |cos| peaks at phase 0; |ddnu|^2 = (A f^2 sin)^2 + (A f cos)^4
    c2 = np.linspace(0.0, 1.0, 200_001)
    ddnu = np.sqrt((A * f * f) ** 2 * (1.0 - c2) + (A * f) ** 4 * c2 ** 2)
    return EnvelopeConstants(
        K_a12=f ** 2, K_a3=f ** 2, K_j=math.sqrt(2.0) * f ** 3, K_s=math.sqrt(2.0) * f ** 4,
        K_dnu=A * f, K_ddnu=float(ddnu.max()),
    )
