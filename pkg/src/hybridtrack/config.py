"""INI run configuration: parsing, validation and canonical echo."""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .errors import ConfigError
from .feasibility import EnvelopeConstants, Gains, VehicleParams
from .simulator import SimConfig
from .trajectory import PRESETS, TrajectoryConfig

_VEC3 = "vec3"
_VEC4 = "vec4"

# section -> key -> kind
SCHEMA: Dict[str, Dict[str, str]] = {
    "vehicle": {"m": "float", "g": "float", "J": _VEC3, "T_max_hw": "float", "tau_max_hw": _VEC3},
    "gains": {f.name: "float" for f in fields(Gains)},
    "trajectory": {"preset": "str", "frequency": "float", "offset": _VEC3, "yaw_amplitude": "float"},
    "envelope": {f.name: "float" for f in fields(EnvelopeConstants)},
    "initial": {"p0": _VEC3, "v0": _VEC3, "euler0_deg": _VEC3, "q0": _VEC4, "omega0": _VEC3,
                "u_f0": _VEC3, "u_s0": _VEC3, "q_hat0": _VEC4, "m_star0": "int"},
    "sim": {"dt": "float", "t_final": "float", "monitors": "bool"},
    "audit": {"filter_init": "str"},
    "output": {"dir": "str", "plots": "bool"},
}

DEFAULT_OUTPUT = {"dir": "out", "plots": True}


def _key_lines(text: str) -> Dict[Tuple[str, str], int]:
    """Line number of every ``key = value`` pair, for diagnostics."""
    where: Dict[Tuple[str, str], int] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        m = re.match(r"^\[([^\]]+)\]", stripped)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", stripped)
        if m and section is not None:
            where[(section, m.group(1).strip())] = lineno
    return where


def _parse_value(kind: str, raw: str, loc: str):
    try:
        if kind == "float":
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError("not finite")
            return v
        if kind == "int":
            return int(raw)
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind in (_VEC3, _VEC4):
            n = 3 if kind == _VEC3 else 4
            parts = [p for p in re.split(r"[,\s]+", raw.strip()) if p]
            if len(parts) != n:
                raise ValueError(f"expected {n} comma-separated numbers, got {len(parts)}")
            vals = tuple(float(p) for p in parts)
            if not all(math.isfinite(v) for v in vals):
                raise ValueError("not finite")
            return vals
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"{loc}: {exc}") from None


class RunConfig:
    """A parsed configuration: the simulation setup plus output options."""

    def __init__(self, sim: SimConfig, output_dir: str = DEFAULT_OUTPUT["dir"],
                 plots: bool = DEFAULT_OUTPUT["plots"], source: Optional[str] = None):
        self.sim = sim
        self.output_dir = output_dir
        self.plots = plots
        self.source = source

    def __eq__(self, other) -> bool:
        return (isinstance(other, RunConfig) and _sim_eq(self.sim, other.sim)
                and self.output_dir == other.output_dir and self.plots == other.plots)


def _sim_eq(a: SimConfig, b: SimConfig) -> bool:
    return to_ini(RunConfig(a)) == to_ini(RunConfig(b))


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep key case
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    lines = _key_lines(text)
    values: Dict[str, Dict[str, object]] = {}
    errors: List[str] = []
    for section in parser.sections():
        if section not in SCHEMA:
            errors.append(f"{source}: unknown section [{section}] (allowed: {', '.join(SCHEMA)})")
            continue
        values[section] = {}
        for key, raw in parser.items(section):
            loc = f"{source}:{lines.get((section, key), '?')}: [{section}] {key}"
            if key not in SCHEMA[section]:
                errors.append(f"{loc}: unknown key (allowed: {', '.join(SCHEMA[section])})")
                continue
            values[section][key] = _parse_value(SCHEMA[section][key], raw, loc)
    if errors:
        raise ConfigError("\n".join(errors))
    return _build(values, source)


def _build(values: Dict[str, Dict[str, object]], source: str) -> RunConfig:
    def section(name):
        return values.get(name, {})

    try:
        veh = VehicleParams(**section("vehicle"))
        gains = Gains(**section("gains"))
        traj_kw = dict(section("trajectory"))
        if "preset" in traj_kw and traj_kw["preset"] not in PRESETS:
            raise ValueError(f"unknown trajectory preset {traj_kw['preset']!r}; choose from {sorted(PRESETS)}")
        traj = TrajectoryConfig(**traj_kw)
        env = None
        if "envelope" in values:
            missing = [k for k in SCHEMA["envelope"] if k not in values["envelope"]]
            if missing:
                raise ValueError(f"[envelope] must give all constants; missing {', '.join(missing)}")
            env = EnvelopeConstants(**values["envelope"])
        init = dict(section("initial"))
        sim_kw = dict(section("sim"))
        mode = section("audit").get("filter_init", "zero")
        if mode not in ("zero", "ball"):
            raise ValueError(f"[audit] filter_init must be 'zero' or 'ball', got {mode!r}")
        if mode == "zero" and (any(init.get("u_f0", (0.0,) * 3)) or any(init.get("u_s0", (0.0,) * 3))):
            raise ValueError("nonzero initial filter state requires [audit] filter_init = ball")
        sim = SimConfig(vehicle=veh, gains=gains, trajectory=traj, envelope=env,
                        arbitrary_filter_init=(mode == "ball"), **init, **sim_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from None
    out = section("output")
    return RunConfig(sim, out.get("dir", DEFAULT_OUTPUT["dir"]), out.get("plots", DEFAULT_OUTPUT["plots"]),
                     source)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config(text, str(path))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(float(x)) for x in v)
    return str(v)


def to_ini(rc: RunConfig) -> str:
    """Canonical text of the effective configuration with defaults resolved."""
    s = rc.sim
    blocks = [
        ("vehicle", {f.name: getattr(s.vehicle, f.name) for f in fields(VehicleParams)}),
        ("gains", {f.name: getattr(s.gains, f.name) for f in fields(Gains)}),
        ("trajectory", {"preset": s.trajectory.preset, "frequency": s.trajectory.frequency,
                        "offset": s.trajectory.offset, "yaw_amplitude": s.trajectory.yaw_amplitude}),
    ]
    if s.envelope is not None:
        blocks.append(("envelope", {f.name: getattr(s.envelope, f.name) for f in fields(EnvelopeConstants)}))
    init = {"p0": s.p0, "v0": s.v0, "euler0_deg": s.euler0_deg, "omega0": s.omega0, "u_f0": s.u_f0,
            "u_s0": s.u_s0, "q_hat0": s.q_hat0, "m_star0": s.m_star0}
    if s.q0 is not None:
        init["q0"] = s.q0
    blocks += [
        ("initial", init),
        ("sim", {"dt": s.dt, "t_final": s.t_final, "monitors": s.monitors}),
        ("audit", {"filter_init": "ball" if s.arbitrary_filter_init else "zero"}),
        ("output", {"dir": rc.output_dir, "plots": rc.plots}),
    ]
    lines: List[str] = []
    for name, kv in blocks:
        lines.append(f"[{name}]")
        lines += [f"{k} = {_fmt(v)}" for k, v in kv.items()]
        lines.append("")
    return "\n".join(lines)


def with_overrides(rc: RunConfig, **sim_changes) -> RunConfig:
    sim_changes = {k: v for k, v in sim_changes.items() if v is not None}
    return RunConfig(replace(rc.sim, **sim_changes), rc.output_dir, rc.plots, rc.source)
