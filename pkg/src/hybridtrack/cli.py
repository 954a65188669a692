"""Command-line front end.

Exit codes: 0 success, 1 infeasible configuration or runtime breach,
2 usage, I/O or parse error.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

from .config import RunConfig, load_config, parse_config, to_ini, with_overrides
from .errors import ConfigError, HybridTrackError, InfeasibleConfigError, InvariantBreach
from .simulator import fmt_float, preflight, read_csv, run, summary, write_csv, write_jumps

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SUMMARY_MARKER = "[summary]"


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return fmt_float(v)
    return str(v)


def format_report(items, failures: Sequence[str]) -> str:
    width = max(len(k) for k, _ in items)
    lines = [f"{k.ljust(width)}  {_fmt_value(v)}" for k, v in items]
    lines += [f"FAIL: {f}" for f in failures]
    return "\n".join(lines)


def cmd_audit(args) -> int:
    rc = load_config(args.config)
    env, rep = preflight(rc.sim)
    items = [(f"env_{k}", v) for k, v in vars(env).items()] + rep.as_items()
    print(format_report(items, rep.failures))
    out = Path(args.out or rc.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "audit.txt", "w") as fh:
        for k, v in items:
            fh.write(f"{k} = {_fmt_value(v)}\n")
        for f in rep.failures:
            fh.write(f"failure = {f}\n")
    return EXIT_OK if rep.feasible else EXIT_FAIL


def _write_summary(path: Path, rc: RunConfig, stats, log) -> None:
    with open(path, "w") as fh:
        fh.write(to_ini(rc))
        fh.write(SUMMARY_MARKER + "\n")
        for k, v in stats.items():
            fh.write(f"{k} = {_fmt_value(v)}\n")
        fh.write(f"k1_composite = {_fmt_value(log.k1)}\n")
        fh.write(f"monitor_a = {_fmt_value(log.monitor_gains.a)}\n")
        fh.write(f"monitor_b = {_fmt_value(log.monitor_gains.b)}\n")
        fh.write("\n[bounds]\n")
        for k, v in log.bounds.as_items():
            fh.write(f"{k} = {_fmt_value(v)}\n")
        for v in log.monitor_violations:
            fh.write(f"monitor_violation = {v}\n")


def config_from_summary(text: str, source: str = "<summary>") -> RunConfig:
    """Re-parse the effective configuration echoed at the top of a summary file."""
    head = text.split("\n" + SUMMARY_MARKER, 1)[0]
    return parse_config(head, source)


def execute_run(rc: RunConfig, out: Path, force: bool = False, plots: Optional[bool] = None) -> int:
    out.mkdir(parents=True, exist_ok=True)
    try:
        log = run(rc.sim, force=force)
    except InfeasibleConfigError as exc:
        print(f"error: {exc} (use --force to run anyway)", file=sys.stderr)
        return EXIT_FAIL
    except InvariantBreach as exc:
        print(f"invariant breach: {exc}", file=sys.stderr)
        return EXIT_FAIL
    write_csv(log, out / "log.csv")
    write_jumps(log, out / "jumps.csv")
    stats = summary(log)
    _write_summary(out / "summary.txt", rc, stats, log)
    if rc.plots if plots is None else plots:
        from .plotting import extract_panels, render_panels, write_panels
        from .simulator import LOG_COLUMNS

        panels = extract_panels(LOG_COLUMNS, log.table())
        write_panels(panels, out / "panels")
        render_panels(panels, out / "panels")
    print(f"wrote {out / 'log.csv'} ({stats['steps']} rows)")
    for k in ("ss_pos_err_max", "ss_mrp_norm_max", "T_min_observed", "T_max_observed", "jumps",
              "monitor_violations"):
        print(f"{k} = {_fmt_value(stats[k])}")
    for v in log.monitor_violations[:20]:
        print(f"monitor: {v}", file=sys.stderr)
    return EXIT_FAIL if log.monitor_violations else EXIT_OK


def cmd_run(args) -> int:
    rc = load_config(args.config)
    try:
        rc = with_overrides(rc, t_final=args.t_final, dt=args.dt, monitors=False if args.no_monitors else None)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = Path(args.out or rc.output_dir)
    return execute_run(rc, out, args.force, False if args.no_plots else None)


def cmd_plotdata(args) -> int:
    from .plotting import extract_panels, render_panels, write_panels

    try:
        header, data = read_csv(args.log)
        panels = extract_panels(header, data)
    except OSError as exc:
        print(f"error: cannot read {args.log}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out or Path(args.log).parent / "panels")
    for p in write_panels(panels, out):
        print(f"wrote {p}")
    if not args.no_png:
        for p in render_panels(panels, out):
            print(f"wrote {p}")
    return EXIT_OK


def _sweep_one(job) -> int:
    path, out, force, plots = job
    try:
        rc = load_config(path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return execute_run(rc, Path(out), force, plots)


def cmd_sweep(args) -> int:
    base = Path(args.out)
    jobs = [(c, str(base / Path(c).stem), args.force, False if args.no_plots else None) for c in args.configs]
    stems = [Path(c).stem for c in args.configs]
    if len(set(stems)) != len(stems):
        raise ConfigError("sweep configs must have distinct file names")
    workers = args.jobs or min(len(jobs), os.cpu_count() or 1)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        codes = list(pool.map(_sweep_one, jobs))
    for c, code in zip(args.configs, codes):
        print(f"{c}: exit {code}")
    return max(codes) if codes else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybridtrack", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("audit", help="a-priori feasibility report")
    a.add_argument("config")
    a.add_argument("--out", help="directory for audit.txt (default: [output] dir)")
    a.set_defaults(func=cmd_audit)

    r = sub.add_parser("run", help="closed-loop simulation")
    r.add_argument("config")
    r.add_argument("--t-final", type=float, dest="t_final")
    r.add_argument("--dt", type=float)
    r.add_argument("--out")
    r.add_argument("--no-monitors", action="store_true")
    r.add_argument("--force", action="store_true", help="run even if the audit fails")
    r.add_argument("--no-plots", action="store_true", help="skip panel files and figures")
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("plotdata", help="per-panel data files from a log")
    d.add_argument("log")
    d.add_argument("--out")
    d.add_argument("--no-png", action="store_true")
    d.set_defaults(func=cmd_plotdata)

    s = sub.add_parser("sweep", help="run several configs in parallel")
    s.add_argument("configs", nargs="+")
    s.add_argument("--out", default="sweep")
    s.add_argument("--jobs", type=int)
    s.add_argument("--force", action="store_true")
    s.add_argument("--no-plots", action="store_true")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HybridTrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
