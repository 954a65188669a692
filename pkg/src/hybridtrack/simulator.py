"""Closed-loop hybrid simulation of the vehicle under the full control stack.

Each step evaluates the controller at the current sample, services the
lifting jumps, checks the input and lifting invariants, then advances the
plant and the position filters with one classical RK4 step. Thrust and
torque are held over the step. The filters are part of the controller's
continuous dynamics, so their input is re-evaluated at every RK4 stage.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import attitude as att
from .errors import InfeasibleConfigError, InvariantBreach
from .feasibility import BoundsReport, EnvelopeConstants, Gains, VehicleParams, audit, envelope_from_trajectory
from .inner_loop import (MonitorGains, attitude_error, choose_monitor_gains, feedforward, lyapunov_v2,
                         torque)
from .lifting import JumpEvent, LiftState, settle
from .outer_loop import (FilterState, compose_control, filter_rhs, lyapunov_v1, lyapunov_v1_gradient,
                         primary_feedback, to_z)
from .trajectory import E3, TrajectoryConfig, attitude_reference, eval_reference

BOUND_SLACK = 1e-9
LIFT_TOL = 1e-8


@dataclass(frozen=True)
class PlantState:
    p: np.ndarray
    v: np.ndarray
    q: np.ndarray
    omega: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate((self.p, self.v, self.q, self.omega))

    @staticmethod
    def from_array(x) -> "PlantState":
        x = np.asarray(x, dtype=float)
        return PlantState(x[0:3].copy(), x[3:6].copy(), x[6:10].copy(), x[10:13].copy())


@dataclass(frozen=True)
class SimConfig:
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    gains: Gains = field(default_factory=Gains)
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    dt: float = 0.01
    t_final: float = 60.0
    p0: Tuple[float, float, float] = (5.0, 5.0, 10.0)
    v0: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    euler0_deg: Tuple[float, float, float] = (-179.0, 0.0, 100.0)
    q0: Optional[Tuple[float, float, float, float]] = None  # overrides euler0_deg when given
    omega0: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    u_f0: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    u_s0: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    q_hat0: Tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    m_star0: int = 1
    envelope: Optional[EnvelopeConstants] = None
    arbitrary_filter_init: bool = False
    monitors: bool = True

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_final >= 0.0:
            raise ValueError(f"t_final must be nonnegative, got {self.t_final}")
        box = self.gains.M_p * (1.0 + 1e-12)
        if max(np.abs(self.u_f0).max(), np.abs(self.u_s0).max()) > box:
            raise ValueError(f"initial filter state must lie in the M_p box (M_p = {self.gains.M_p})")

    def initial_plant(self) -> PlantState:
        if self.q0 is not None:
            q = att.normalize_quat(self.q0)
        else:
            roll, pitch, yaw = np.radians(self.euler0_deg)
            q, _ = att.quat_pair_from_rot(att.rot_from_euler_zyx(roll, pitch, yaw))
        return PlantState(np.array(self.p0, float), np.array(self.v0, float), q, np.array(self.omega0, float))

    def resolved_envelope(self) -> EnvelopeConstants:
        return self.envelope if self.envelope is not None else envelope_from_trajectory(self.trajectory)


# -- plant -----------------------------------------------------------------

def plant_rhs(x: PlantState, T: float, tau, veh: VehicleParams) -> PlantState:
    q0, q1, q2, q3 = x.q
    # third column of rot_from_quat(q)
    thrust_axis = np.array([2.0 * (q1 * q3 + q0 * q2), 2.0 * (q2 * q3 - q0 * q1), 1.0 - 2.0 * (q1 * q1 + q2 * q2)])
    J = np.asarray(veh.J, dtype=float)
    dp = x.v
    dv = -veh.g * E3 + thrust_axis * (T / veh.m)
    dq = 0.5 * att.quat_multiply(x.q, np.concatenate(([0.0], x.omega)))
    Jw = J * x.omega
    domega = (att.cross3(Jw, x.omega) + np.asarray(tau, dtype=float)) / J
    return PlantState(dp, dv, dq, domega)


# -- logging ---------------------------------------------------------------

PRIMARY_COLUMNS = [
    "t", "j", "p_x", "p_y", "p_z", "p_d_x", "p_d_y", "p_d_z", "pos_err", "yaw", "psi_d", "mrp_norm",
    "T", "tau_1", "tau_2", "tau_3", "ubar_p_norm", "u_f_norm", "u_s_norm", "s_theta_norm",
    "s_omega_norm", "V1", "V2", "omega_d_norm", "domega_d_norm",
]
EXTRA_COLUMNS = (
    [f"z1_{c}" for c in "xyz"] + [f"z2_{c}" for c in "xyz"] + [f"ubar_p_{c}" for c in "xyz"]
    + [f"u_f_{c}" for c in "xyz"] + [f"u_s_{c}" for c in "xyz"] + [f"rho_{c}" for c in "xyz"]
    + [f"theta_{i}" for i in (1, 2, 3)] + [f"omega_err_{i}" for i in (1, 2, 3)]
    + [f"tau_c_{i}" for i in (1, 2, 3)] + ["m_star", "V2_pre", "W_d", "V3"]
)
LOG_COLUMNS = PRIMARY_COLUMNS + EXTRA_COLUMNS


@dataclass
class LogRecord:
    t: float
    j: int
    p: np.ndarray
    p_d: np.ndarray
    pos_err: float
    yaw: float
    psi_d: float
    mrp_norm: float
    T: float
    tau: np.ndarray
    ubar_p_norm: float
    u_f_norm: float
    u_s_norm: float
    s_theta_norm: float
    s_omega_norm: float
    V1: float
    V2: float
    omega_d_norm: float
    domega_d_norm: float
    z1: np.ndarray
    z2: np.ndarray
    ubar_p: np.ndarray
    u_f: np.ndarray
    u_s: np.ndarray
    rho: np.ndarray
    theta: np.ndarray
    omega_err: np.ndarray
    tau_c: np.ndarray
    m_star: int
    V2_pre: float
    W_d: float
    V3: float = math.nan

    def row(self) -> List[float]:
        out: List[float] = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray):
                out.extend(float(x) for x in v)
            else:
                out.append(float(v))
        return out


@dataclass
class Log:
    records: List[LogRecord]
    jumps: List[JumpEvent]
    bounds: BoundsReport
    envelope: EnvelopeConstants
    monitor_gains: MonitorGains
    config: SimConfig
    monitor_violations: List[str] = field(default_factory=list)
    k1: float = math.nan
    _table: Optional[np.ndarray] = field(default=None, repr=False)

    def table(self) -> np.ndarray:
        if self._table is None or len(self._table) != len(self.records):
            self._table = np.array([r.row() for r in self.records], dtype=float)
        return self._table

    def column(self, name: str) -> np.ndarray:
        return self.table()[:, LOG_COLUMNS.index(name)]

    def columns(self, *names: str) -> np.ndarray:
        idx = [LOG_COLUMNS.index(n) for n in names]
        return self.table()[:, idx]


# -- controller evaluation -------------------------------------------------

@dataclass
class _ControlSample:
    T: float
    tau: np.ndarray
    record: LogRecord
    lift: LiftState
    events: List[JumpEvent]
    pre_theta: np.ndarray
    omega_err: np.ndarray
    R_err: np.ndarray


def _filter_and_feedback(t, x: PlantState, xf: FilterState, cfg: SimConfig):
    ref = eval_reference(t, cfg.trajectory)
    z = to_z(x.p - ref.p_d, x.v - ref.dp_d, xf, cfg.gains)
    return ref, z, primary_feedback(z, cfg.gains)


def _rhs(t, X, T, tau, cfg: SimConfig, with_work: bool):
    """Time derivative of the stacked state ``(plant, filters, work)``."""
    x = PlantState.from_array(X[:13])
    xf = FilterState.from_array(X[13:19])
    ref, z, ubar = _filter_and_feedback(t, x, xf, cfg)
    dx = plant_rhs(x, T, tau, cfg.vehicle)
    dxf = filter_rhs(xf, ubar, cfg.gains)
    dW = 0.0
    if with_work:
        # work done on V1 by the gap between the realised and commanded acceleration
        u = xf.u_f + cfg.vehicle.g * E3 + ref.ddp_d
        gap = dx.v - (u - cfg.vehicle.g * E3)
        g1, g2 = lyapunov_v1_gradient(z, xf, cfg.gains)
        c = 1.0 / cfg.gains.k_f + 1.0 / cfg.gains.k_s
        dW = c * float(g1 @ gap) + float(g2 @ gap)
    return np.concatenate((dx.as_array(), dxf.as_array(), [dW]))


def rk4_step(t, X, dt, T, tau, cfg: SimConfig, with_work: bool = True) -> np.ndarray:
    k1 = _rhs(t, X, T, tau, cfg, with_work)
    k2 = _rhs(t + 0.5 * dt, X + 0.5 * dt * k1, T, tau, cfg, with_work)
    k3 = _rhs(t + 0.5 * dt, X + 0.5 * dt * k2, T, tau, cfg, with_work)
    k4 = _rhs(t + dt, X + dt * k3, T, tau, cfg, with_work)
    out = X + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    out[6:10] /= np.linalg.norm(out[6:10])
    return out


def evaluate_controller(t: float, j: int, X: np.ndarray, lift: LiftState, cfg: SimConfig,
                        mon: MonitorGains) -> _ControlSample:
    """Controller pipeline at one sample, including the lifting settle."""
    veh, gains = cfg.vehicle, cfg.gains
    x = PlantState.from_array(X[:13])
    xf = FilterState.from_array(X[13:19])
    ref, z, ubar = _filter_and_feedback(t, x, xf, cfg)
    out = compose_control(xf, ubar, ref, gains, veh.m, veh.g)
    aref = attitude_reference(out.u, out.du, out.ddu, ref)
    R = att.rot_from_quat(x.q)
    R_err, omega_err = attitude_error(R, aref.R_d, x.omega, aref.omega_d)

    pre = att.mrp_from_quat(lift.m_star * att.nearest_lift(lift.q_hat, R_err))
    lift2, theta, events = settle(lift, R_err, gains.alpha, gains.delta, t, j)
    tau_c = feedforward(R_err, aref.omega_d, aref.domega_d, veh.J)
    cmd = torque(theta, omega_err, tau_c, gains)

    if cfg.monitors:
        V1 = lyapunov_v1(z, xf, gains)
        V2 = lyapunov_v2(theta, omega_err, gains, veh.J, mon)
        V2_pre = math.inf if att.is_inf(pre) else lyapunov_v2(pre, omega_err, gains, veh.J, mon)
    else:
        V1 = V2 = V2_pre = math.nan

    p_err = x.p - ref.p_d
    rec = LogRecord(
        t=t, j=j + len(events), p=x.p, p_d=ref.p_d, pos_err=float(np.linalg.norm(p_err)),
        yaw=att.yaw_from_rot(R), psi_d=ref.psi_d, mrp_norm=float(np.linalg.norm(theta)), T=out.T,
        tau=cmd.tau, ubar_p_norm=float(np.linalg.norm(ubar)), u_f_norm=float(np.linalg.norm(xf.u_f)),
        u_s_norm=float(np.linalg.norm(xf.u_s)), s_theta_norm=float(np.linalg.norm(cmd.s_theta_out)),
        s_omega_norm=float(np.linalg.norm(cmd.s_omega_out)), V1=V1, V2=V2,
        omega_d_norm=float(np.linalg.norm(aref.omega_d)), domega_d_norm=float(np.linalg.norm(aref.domega_d)),
        z1=z.z1, z2=z.z2, ubar_p=ubar, u_f=xf.u_f, u_s=xf.u_s, rho=aref.rho, theta=theta,
        omega_err=omega_err, tau_c=tau_c, m_star=lift2.m_star, V2_pre=V2_pre, W_d=float(X[19]),
    )
    return _ControlSample(out.T, cmd.tau, rec, lift2, events, pre, omega_err, R_err)


# -- invariant checks ------------------------------------------------------

def _check_hard_invariants(s: _ControlSample, lift: LiftState, cfg: SimConfig, bounds: BoundsReport) -> None:
    rec = s.record
    t, j = rec.t, rec.j
    gains, veh = cfg.gains, cfg.vehicle
    if not (bounds.T_min - BOUND_SLACK <= s.T <= bounds.T_max + BOUND_SLACK):
        raise InvariantBreach(f"thrust {s.T:.9g} N outside [{bounds.T_min:.9g}, {bounds.T_max:.9g}]", t, j)
    if s.T > veh.T_max_hw:
        raise InvariantBreach(f"thrust {s.T:.9g} N above hardware limit {veh.T_max_hw:.9g} N", t, j)
    for i in range(3):
        a = abs(s.tau[i])
        if a > bounds.tau_required[i] + BOUND_SLACK:
            raise InvariantBreach(
                f"torque axis {i + 1} |{s.tau[i]:.9g}| above audited ceiling {bounds.tau_required[i]:.9g}", t, j)
        if a > veh.tau_max_hw[i]:
            raise InvariantBreach(
                f"torque axis {i + 1} |{s.tau[i]:.9g}| above hardware limit {veh.tau_max_hw[i]:.9g}", t, j)
    if rec.omega_d_norm > bounds.U_omega_d + BOUND_SLACK:
        raise InvariantBreach(f"|omega_d| = {rec.omega_d_norm:.9g} above bound {bounds.U_omega_d:.9g}", t, j)
    if rec.domega_d_norm > bounds.U_domega_d + BOUND_SLACK:
        raise InvariantBreach(f"|domega_d| = {rec.domega_d_norm:.9g} above bound {bounds.U_domega_d:.9g}", t, j)
    if rec.mrp_norm > 1.0 + gains.delta:
        raise InvariantBreach(f"lifted MRP norm {rec.mrp_norm:.12g} above 1 + delta", t, j)
    lift_err = np.abs(att.rot_from_mrp(rec.theta) - s.R_err).max()
    if lift_err > LIFT_TOL:
        raise InvariantBreach(f"lifted MRP does not reproduce the rotation error ({lift_err:.3e})", t, j)
    if att.quat_dist(lift.q_hat, s.R_err) >= gains.alpha:
        raise InvariantBreach("memory quaternion left the flow set", t, j)


def _monitor_tolerance(v: float) -> float:
    return 1e-6 * (1.0 + abs(v))


# -- driver ----------------------------------------------------------------

def preflight(cfg: SimConfig) -> Tuple[EnvelopeConstants, BoundsReport]:
    env = cfg.resolved_envelope()
    return env, audit(env, cfg.gains, cfg.vehicle, cfg.arbitrary_filter_init)


def run(cfg: SimConfig, force: bool = False) -> Log:
    """Simulate from ``0`` to ``t_final``; one log record per sample.

    Raises :class:`InfeasibleConfigError` when the audit fails and ``force``
    is not set, and :class:`InvariantBreach` on any hard invariant failure.
    Monitor violations are collected in ``Log.monitor_violations``.
    """
    env, bounds = preflight(cfg)
    if not math.isfinite(bounds.T_min):
        raise InfeasibleConfigError("; ".join(bounds.failures))
    if not bounds.feasible and not force:
        raise InfeasibleConfigError("audit failed: " + "; ".join(bounds.failures))
    mon = choose_monitor_gains(cfg.gains, cfg.vehicle.J)

    x0 = cfg.initial_plant()
    X = np.concatenate((x0.as_array(), cfg.u_f0, cfg.u_s0, [0.0]))
    lift = LiftState(att.normalize_quat(cfg.q_hat0), cfg.m_star0)
    n_steps = int(round(cfg.t_final / cfg.dt))
    records: List[LogRecord] = []
    jumps: List[JumpEvent] = []
    violations: List[str] = []
    j = 0
    prev: Optional[LogRecord] = None
    for k in range(n_steps + 1):
        t = k * cfg.dt
        s = evaluate_controller(t, j, X, lift, cfg, mon)
        lift = s.lift
        _check_hard_invariants(s, lift, cfg, bounds)
        rec = s.record
        if cfg.monitors:
            if prev is not None:
                dV1 = rec.V1 - prev.V1 - (rec.W_d - prev.W_d)
                if dV1 > _monitor_tolerance(prev.V1):
                    violations.append(f"V1 increased by {dV1:.3e} along flow at (t={t:.2f}, j={j})")
                if rec.V2_pre - prev.V2 > _monitor_tolerance(prev.V2):
                    violations.append(
                        f"V2 increased by {rec.V2_pre - prev.V2:.3e} along flow at (t={t:.2f}, j={j})")
            if any(e.kind == "m" for e in s.events) and not rec.V2 < rec.V2_pre:
                violations.append(f"V2 did not decrease across chart flip at (t={t:.2f}, j={rec.j})")
        jumps.extend(s.events)
        j = rec.j
        records.append(rec)
        prev = rec
        if k < n_steps:
            X = rk4_step(t, X, cfg.dt, s.T, s.tau, cfg, cfg.monitors)
    log = Log(records, jumps, bounds, env, mon, cfg, violations)
    if cfg.monitors:
        _fill_v3(log)
    return log


def composite_weight(log: Log, margin: float = 0.99) -> float:
    """Largest admissible weight of V1 in the composite monitor, times ``margin``.

    The admissible range depends on the peak saturation argument and peak
    angular velocity error along the solution, so it is taken from the log.
    """
    g = log.config.gains
    veh = log.config.vehicle
    alpha_1 = max(max(float(np.linalg.norm(g.k_p * r.z1 + g.k_v * r.z2)), float(np.linalg.norm(g.k_p * r.z1)))
                  for r in log.records)
    alpha_w = max(float(np.linalg.norm(r.omega_err)) for r in log.records)
    slope_p = 1.0 / math.cosh(alpha_1 / g.M_p) ** 2
    M_star = log.monitor_gains.sat_level
    slope_w = (1.0 + (g.k_omega * alpha_w / M_star) ** 2) ** -1.5
    alpha = 1.0 + g.delta
    gamma = g.k_theta * g.M_theta / math.sqrt(g.M_theta ** 2 + (g.k_theta * alpha) ** 2)
    bound = (min(1.0 / (2.0 * g.k_v), slope_p / g.k_p) * log.monitor_gains.b * g.k_omega * gamma * slope_w
             / 32.0 ** 2 * veh.m ** 2 / log.bounds.T_min ** 2)
    return margin * bound


def _fill_v3(log: Log) -> None:
    """Composite monitor ``k1 V1 + V2``; report only."""
    k1 = composite_weight(log)
    for r in log.records:
        r.V3 = k1 * r.V1 + r.V2
    log.k1 = k1


# -- summaries and files ---------------------------------------------------

def summary(log: Log, tail_fraction: float = 0.2) -> Dict[str, float]:
    tab = log.table()
    n = len(tab)
    tail = tab[int(math.floor((1.0 - tail_fraction) * (n - 1))):]
    col = {name: i for i, name in enumerate(LOG_COLUMNS)}
    yaw_err = np.abs(att.wrap_angle(tail[:, col["yaw"]] - tail[:, col["psi_d"]]))
    tau = np.abs(tab[:, [col["tau_1"], col["tau_2"], col["tau_3"]]])
    flips = [e for e in log.jumps if e.kind == "m"]
    return {
        "steps": n,
        "t_final": float(tab[-1, col["t"]]),
        "jumps": len(log.jumps),
        "chart_flips": len(flips),
        "memory_resyncs": len(log.jumps) - len(flips),
        "ss_pos_err_max": float(tail[:, col["pos_err"]].max()),
        "ss_mrp_norm_max": float(tail[:, col["mrp_norm"]].max()),
        "ss_yaw_err_max": float(yaw_err.max()),
        "T_min_observed": float(tab[:, col["T"]].min()),
        "T_max_observed": float(tab[:, col["T"]].max()),
        "tau_1_max_abs": float(tau[:, 0].max()),
        "tau_2_max_abs": float(tau[:, 1].max()),
        "tau_3_max_abs": float(tau[:, 2].max()),
        "omega_d_norm_max": float(tab[:, col["omega_d_norm"]].max()),
        "domega_d_norm_max": float(tab[:, col["domega_d_norm"]].max()),
        "monitor_violations": len(log.monitor_violations),
        "clamp_events": 0,
    }


def fmt_float(x: float) -> str:
    return "%.17g" % x


def write_csv(log: Log, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for row in log.table():
            w.writerow([fmt_float(v) for v in row])


def write_jumps(log: Log, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "j", "kind", "norm_before", "norm_after"])
        for e in log.jumps:
            w.writerow([fmt_float(e.t), e.j, e.kind, fmt_float(e.norm_before), fmt_float(e.norm_after)])


def read_csv(path) -> Tuple[List[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows[0]
    if len(rows) < 2:
        raise ValueError(f"{path}: no data rows")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            data.append([float(v) for v in row])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    return header, np.array(data)


def exact_tracking_config(cfg: SimConfig, t0: float = 0.0) -> SimConfig:
    """Copy of ``cfg`` whose initial state sits exactly on the reference."""
    if t0 != 0.0:
        raise ValueError("exact tracking start is only defined at t = 0")
    ref = eval_reference(0.0, cfg.trajectory)
    u = cfg.vehicle.g * E3 + ref.ddp_d
    aref = attitude_reference(u, ref.d3p_d, ref.d4p_d, ref)
    q, _ = att.quat_pair_from_rot(aref.R_d)
    return replace(
        cfg, p0=tuple(ref.p_d), v0=tuple(ref.dp_d), omega0=tuple(aref.omega_d),
        q0=tuple(q), u_f0=(0.0, 0.0, 0.0), u_s0=(0.0, 0.0, 0.0),
        q_hat0=tuple(q), m_star0=1,
    )

