import shutil
from pathlib import Path

import numpy as np
import pytest

from hybridtrack.cli import config_from_summary, main
from hybridtrack.config import load_config, with_overrides
from hybridtrack.plotting import PANELS, panel_columns
from hybridtrack.simulator import LOG_COLUMNS, read_csv

SCENARIO = Path(__file__).resolve().parents[1] / "configs" / "tilted_circle.ini"


def write_config(tmp_path, extra, name="c.ini"):
    path = tmp_path / name
    path.write_text(SCENARIO.read_text().replace("[output]\ndir = out", f"[output]\ndir = {tmp_path / 'out'}")
                    + extra)
    return path


def with_section_value(text, section, key, value):
    lines = text.splitlines()
    start = lines.index(f"[{section}]")
    for i in range(start + 1, len(lines)):
        if lines[i].split("=")[0].strip() == key:
            lines[i] = f"{key} = {value}"
            return "\n".join(lines) + "\n"
    raise KeyError(key)


class TestAudit:
    def test_scenario_reports_bounds(self, tmp_path, capsys):
        code = main(["audit", str(SCENARIO), "--out", str(tmp_path)])
        out = capsys.readouterr().out
        # the third torque axis needs more than the hardware allows under the bound chain
        assert code == 1
        assert "T_min" in out and "FAIL: axis 3" in out
        report = (tmp_path / "audit.txt").read_text()
        t_min = float(next(l for l in report.splitlines() if l.startswith("T_min =")).split("=")[1])
        assert abs(t_min - 3.51) < 0.01

    def test_large_saturation(self, tmp_path, capsys):
        cfg = tmp_path / "mp.ini"
        cfg.write_text(with_section_value(SCENARIO.read_text(), "gains", "M_p", 10))
        assert main(["audit", str(cfg), "--out", str(tmp_path)]) == 1
        assert "M_p >= g - K_a3" in capsys.readouterr().out

    def test_tight_torque_limits(self, tmp_path, capsys):
        cfg = tmp_path / "tau.ini"
        cfg.write_text(with_section_value(SCENARIO.read_text(), "vehicle", "tau_max_hw", "0.1, 0.1, 0.1"))
        assert main(["audit", str(cfg), "--out", str(tmp_path)]) == 1
        out = capsys.readouterr().out
        assert all(f"FAIL: axis {i}" in out for i in (1, 2, 3))

    def test_generous_limits_pass(self, tmp_path):
        cfg = tmp_path / "ok.ini"
        cfg.write_text(with_section_value(SCENARIO.read_text(), "vehicle", "tau_max_hw", "1, 1, 1"))
        assert main(["audit", str(cfg), "--out", str(tmp_path)]) == 0

    def test_missing_file(self, tmp_path, capsys):
        assert main(["audit", str(tmp_path / "missing.ini")]) == 2
        assert "cannot read" in capsys.readouterr().err

    def test_usage_error(self):
        assert main(["frobnicate"]) == 2


@pytest.fixture(scope="module")
def short_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = main(["run", str(SCENARIO), "--t-final", "2", "--out", str(out), "--force"])
    return code, out


class TestRun:
    def test_refuses_infeasible_without_force(self, tmp_path, capsys):
        assert main(["run", str(SCENARIO), "--t-final", "0.1", "--out", str(tmp_path)]) == 1
        assert "--force" in capsys.readouterr().err

    def test_outputs(self, short_run):
        code, out = short_run
        assert code == 0
        header, data = read_csv(out / "log.csv")
        assert header == LOG_COLUMNS and len(data) == 201
        assert (out / "jumps.csv").exists()
        for name in PANELS:
            assert (out / "panels" / f"{name}.csv").exists()
            assert (out / "panels" / f"{name}.png").stat().st_size > 0

    def test_summary_echoes_config(self, short_run):
        _, out = short_run
        text = (out / "summary.txt").read_text()
        expected = with_overrides(load_config(SCENARIO), t_final=2.0)
        assert config_from_summary(text) == expected
        assert "ss_pos_err_max =" in text and "[bounds]" in text

    def test_deterministic(self, short_run, tmp_path):
        _, out = short_run
        assert main(["run", str(SCENARIO), "--t-final", "2", "--out", str(tmp_path), "--force",
                     "--no-plots"]) == 0
        assert (tmp_path / "log.csv").read_bytes() == (out / "log.csv").read_bytes()
        assert not (tmp_path / "panels").exists()

    def test_bad_override(self, tmp_path):
        assert main(["run", str(SCENARIO), "--dt", "0", "--out", str(tmp_path)]) == 2


class TestPlotdata:
    def test_panels(self, tmp_path, capsys):
        out = tmp_path / "r"
        assert main(["run", str(SCENARIO), "--t-final", "0.5", "--out", str(out), "--force", "--no-plots"]) == 0
        assert main(["plotdata", str(out / "log.csv"), "--out", str(tmp_path / "p"), "--no-png"]) == 0
        files = sorted((tmp_path / "p").glob("*.csv"))
        assert len(files) == 8
        for name in PANELS:
            header, data = read_csv(tmp_path / "p" / f"{name}.csv")
            assert header == panel_columns(name) and data.shape == (51, len(header))

    def test_empty_log(self, tmp_path, capsys):
        (tmp_path / "log.csv").write_text("")
        assert main(["plotdata", str(tmp_path / "log.csv")]) == 2
        assert "empty" in capsys.readouterr().err

    def test_missing_columns(self, tmp_path, capsys):
        (tmp_path / "log.csv").write_text("t,x\n0,1\n")
        assert main(["plotdata", str(tmp_path / "log.csv")]) == 2
        assert "missing columns" in capsys.readouterr().err

    def test_malformed_row(self, tmp_path):
        (tmp_path / "log.csv").write_text("t,x\n0,1\n2\n")
        assert main(["plotdata", str(tmp_path / "log.csv")]) == 2


class TestSweep:
    def test_two_configs(self, tmp_path, capsys):
        a = tmp_path / "a.ini"
        b = tmp_path / "b.ini"
        shutil.copy(SCENARIO, a)
        b.write_text(with_section_value(SCENARIO.read_text(), "sim", "t_final", 0.3))
        a.write_text(with_section_value(SCENARIO.read_text(), "sim", "t_final", 0.2))
        code = main(["sweep", str(a), str(b), "--out", str(tmp_path / "sw"), "--force", "--no-plots",
                     "--jobs", "2"])
        assert code == 0
        assert len(read_csv(tmp_path / "sw" / "a" / "log.csv")[1]) == 21
        assert len(read_csv(tmp_path / "sw" / "b" / "log.csv")[1]) == 31

    def test_duplicate_names(self, tmp_path):
        d = tmp_path / "d"
        d.mkdir()
        shutil.copy(SCENARIO, d / "tilted_circle.ini")
        assert main(["sweep", str(SCENARIO), str(d / "tilted_circle.ini"), "--out", str(tmp_path)]) == 2
