"""Hybrid path lifting from rotation errors to a bounded MRP.

A memory quaternion ``q_hat`` selects one of the two quaternion lifts of the
rotation error, and a sign ``m_star`` selects between the principal and the
shadow MRP chart. Both are updated only by jumps; between jumps the emitted
MRP varies continuously with the rotation error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .attitude import Mrp, mrp_from_quat, mrp_norm, nearest_lift, normalize_quat, quat_dist, quat_pair_from_rot
from .errors import NotInFlowSetError

MAX_SETTLE_ITER = 4


@dataclass(frozen=True)
class LiftState:
    q_hat: np.ndarray
    m_star: int = 1

    def __post_init__(self):
        if self.m_star not in (-1, 1):
            raise ValueError(f"m_star must be +1 or -1, got {self.m_star}")
        q = np.asarray(self.q_hat, dtype=float)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise ValueError(f"memory quaternion must be unit norm, got |q| = {np.linalg.norm(q):.12g}")

    @staticmethod
    def identity(m_star: int = 1) -> "LiftState":
        return LiftState(np.array([1.0, 0.0, 0.0, 0.0]), m_star)


@dataclass(frozen=True)
class JumpEvent:
    t: float
    j: int
    kind: str  # "q" for memory resync, "m" for chart flip
    norm_before: float
    norm_after: float


def _conditions(x: LiftState, q_lift: np.ndarray, alpha: float, delta: float):
    """Jump flags and candidate output given one lift ``q_lift`` of the rotation error."""
    ip = float(x.q_hat @ q_lift)
    nearest = q_lift if ip >= 0.0 else -q_lift
    out = mrp_from_quat(x.m_star * nearest)
    return 1.0 - abs(ip) >= alpha, mrp_norm(out) >= 1.0 + delta, nearest, out


def _raw_output(x: LiftState, R_err) -> Mrp:
    return mrp_from_quat(x.m_star * nearest_lift(x.q_hat, R_err))


def jump_conditions(x: LiftState, R_err, alpha: float, delta: float) -> Tuple[bool, bool]:
    in_dq = quat_dist(x.q_hat, R_err) >= alpha
    in_dm = mrp_norm(_raw_output(x, R_err)) >= 1.0 + delta
    return in_dq, in_dm


def jump(x: LiftState, R_err, alpha: float, delta: float) -> Tuple[LiftState, str]:
    """One application of the jump map; memory resync takes priority."""
    in_dq, in_dm = jump_conditions(x, R_err, alpha, delta)
    if in_dq:
        return LiftState(normalize_quat(nearest_lift(x.q_hat, R_err)), x.m_star), "q"
    if in_dm:
        return LiftState(x.q_hat, -x.m_star), "m"
    raise ValueError("jump requested outside the jump set")


def lift_output(x: LiftState, R_err, alpha: float, delta: float) -> np.ndarray:
    in_dq, in_dm = jump_conditions(x, R_err, alpha, delta)
    if in_dq or in_dm:
        raise NotInFlowSetError(f"lift state needs a jump (memory: {in_dq}, chart: {in_dm})")
    return np.asarray(_raw_output(x, R_err), dtype=float)


def settle(x: LiftState, R_err, alpha: float, delta: float, t: float = 0.0,
           j: int = 0) -> Tuple[LiftState, np.ndarray, List[JumpEvent]]:
    """Apply jumps until the state is in the flow set, then emit the MRP."""
    q_lift, _ = quat_pair_from_rot(R_err)
    events: List[JumpEvent] = []
    for _ in range(MAX_SETTLE_ITER):
        in_dq, in_dm, nearest, out = _conditions(x, q_lift, alpha, delta)
        if not (in_dq or in_dm):
            return x, np.asarray(out, dtype=float), events
        if in_dq:
            x, kind = LiftState(normalize_quat(nearest), x.m_star), "q"
        else:
            x, kind = LiftState(x.q_hat, -x.m_star), "m"
        after = _conditions(x, q_lift, alpha, delta)[3]
        events.append(JumpEvent(t, j + len(events) + 1, kind, mrp_norm(out), mrp_norm(after)))
    raise RuntimeError(f"lifting did not settle within {MAX_SETTLE_ITER} jumps")
