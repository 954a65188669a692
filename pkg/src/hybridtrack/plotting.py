"""Per-panel data extraction from a run log, and optional PNG rendering.

Panel data files are plain CSV and need nothing beyond the standard library
and numpy. Rendering imports matplotlib only when asked for.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .simulator import fmt_float

# name -> (title, y label, columns after "t")
PANELS: Dict[str, Tuple[str, str, List[str]]] = {
    "position_3d": ("Position and reference", "position [m]",
                       ["p_x", "p_y", "p_z", "p_d_x", "p_d_y", "p_d_z"]),
    "yaw_heading": ("Yaw and desired heading", "angle [rad]", ["yaw", "psi_d"]),
    "position_error": ("Position error norm", "error [m]", ["pos_err"]),
    "attitude_error": ("Attitude error norm", "MRP norm", ["mrp_norm"]),
    "thrust": ("Thrust", "T [N]", ["T"]),
    "moments": ("Moments", "torque [N m]", ["tau_1", "tau_2", "tau_3"]),
    "filter_norms": ("Position feedback and filter norms", "[m/s^2]",
                           ["ubar_p_norm", "u_f_norm", "u_s_norm"]),
    "attitude_saturation": ("Attitude saturation outputs", "[N m]", ["s_theta_norm", "s_omega_norm"]),
}

LOG_SCALE = {"position_error", "attitude_error"}


def panel_columns(name: str) -> List[str]:
    return ["t"] + PANELS[name][2]


def extract_panels(header: Sequence[str], data: np.ndarray) -> Dict[str, np.ndarray]:
    if data.ndim != 2 or len(data) == 0:
        raise ValueError("log has no rows")
    index = {h: i for i, h in enumerate(header)}
    out = {}
    for name in PANELS:
        cols = panel_columns(name)
        missing = [c for c in cols if c not in index]
        if missing:
            raise ValueError(f"log is missing columns for {name}: {', '.join(missing)}")
        out[name] = data[:, [index[c] for c in cols]]
    return out


def write_panels(panels: Dict[str, np.ndarray], out_dir) -> List[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, arr in panels.items():
        path = out_dir / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(panel_columns(name))
            for row in arr:
                w.writerow([fmt_float(v) for v in row])
        paths.append(path)
    return paths


def render_panels(panels: Dict[str, np.ndarray], out_dir) -> List[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, arr in panels.items():
        title, ylabel, cols = PANELS[name]
        if name == "position_3d":
            fig = plt.figure(figsize=(6, 5))
            ax = fig.add_subplot(projection="3d")
            ax.plot(arr[:, 1], arr[:, 2], arr[:, 3], label="p")
            ax.plot(arr[:, 4], arr[:, 5], arr[:, 6], "--", label="p_d")
            ax.set_xlabel("x [m]")
            ax.set_ylabel("y [m]")
            ax.set_zlabel("z [m]")
        else:
            fig, ax = plt.subplots(figsize=(6, 3.5))
            for k, c in enumerate(cols, start=1):
                ax.plot(arr[:, 0], arr[:, k], label=c)
            if name in LOG_SCALE and np.all(arr[:, 1:] > 0.0):
                ax.set_yscale("log")
            ax.set_xlabel("t [s]")
            ax.set_ylabel(ylabel)
            ax.grid(True, alpha=0.3)
        ax.set_title(title)
        ax.legend(loc="best", fontsize="small")
        fig.tight_layout()
        path = out_dir / f"{name}.png"
        fig.savefig(path, dpi=110)
        plt.close(fig)
        paths.append(path)
    return paths
