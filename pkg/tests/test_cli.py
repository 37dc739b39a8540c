import json

import numpy as np
import pytest

from ibnls.checkpoint import load_checkpoint, save_checkpoint
from ibnls.cli import main
from ibnls.config import config_from_dict
from ibnls.grid import GridSpec, build_grid
from ibnls.runner import (
    EXIT_CONFIG,
    EXIT_FAIL,
    EXIT_NONFINITE,
    EXIT_PASS,
    SWEEP_COLUMNS,
    read_csv,
    run_scenario,
    run_sweep,
    thread_cap,
)

CONSERVE = """
scenario = "conserve"
grid.dimension = 1
grid.points = 256
grid.half_width = 20.0
model.b = 0.3
model.nu = 1.0
init.amplitude = 0.4
init.width = 0.5
time.dt0 = 2e-4
time.t_end = 0.04
output.cadence = 20
output.csv = "{out}/c.csv"
output.checkpoint = "{out}/c.ckpt"
{extra}
"""


def write(tmp_path, text, name="cfg.toml", **fmt):
    p = tmp_path / name
    p.write_text(text.format(out=tmp_path / "out", **fmt))
    return str(p)


class TestRun:
    def test_conserve_pass_and_artifacts(self, tmp_path, capsys):
        cfg = write(tmp_path, CONSERVE, extra="")
        assert main(["run", cfg]) == EXIT_PASS
        out = capsys.readouterr().out
        assert "PASS" in out
        header, data = read_csv(tmp_path / "out" / "c.csv")
        assert header == ["t", "dt", "mass", "energy", "grad_norm", "lap_norm", "sup_norm", "Z_R8",
                          "rhs_sum", "residual", "R1nu", "R2", "decay_test"]
        assert data.shape[0] == 11
        meta = json.loads((tmp_path / "out" / "c.csv.meta.json").read_text())
        assert meta["halt_reason"] == "TEnd"
        assert load_checkpoint(tmp_path / "out" / "c.ckpt").t == pytest.approx(0.04)

    def test_full_precision_csv(self, tmp_path):
        main(["run", write(tmp_path, CONSERVE, extra="")])
        row = (tmp_path / "out" / "c.csv").read_text().splitlines()[2].split(",")
        assert len(row[2].replace("-", "").replace(".", "").split("e")[0].lstrip("0")) >= 15

    def test_property_failure_exit_1(self, tmp_path):
        cfg = write(tmp_path, CONSERVE, extra="thresholds.mass_drift = 1e-30")
        assert main(["run", cfg]) == EXIT_FAIL

    def test_determinism(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        a.mkdir()
        b.mkdir()
        main(["run", write(a, CONSERVE, extra="")])
        main(["run", write(b, CONSERVE, extra="")])
        assert (a / "out" / "c.csv").read_bytes() == (b / "out" / "c.csv").read_bytes()

    def test_resume_from_checkpoint(self, tmp_path):
        g = build_grid(GridSpec(1, 256, 20.0))
        save_checkpoint(tmp_path / "u0.ckpt", g.field(0.4 * np.exp(-g.r ** 2 / 0.5)), 0.0, 1e-4)
        text = CONSERVE.replace("init.amplitude = 0.4\ninit.width = 0.5",
                                f'init.type = "custom-checkpoint"\ninit.checkpoint = "{tmp_path}/u0.ckpt"')
        assert main(["run", write(tmp_path, text, extra="")]) == EXIT_PASS

    def test_checkpoint_grid_mismatch(self, tmp_path, capsys):
        g = build_grid(GridSpec(1, 128, 20.0))
        save_checkpoint(tmp_path / "u0.ckpt", g.field(np.exp(-g.r ** 2)), 0.0, 1e-4)
        text = CONSERVE.replace("init.amplitude = 0.4\ninit.width = 0.5",
                                f'init.type = "custom-checkpoint"\ninit.checkpoint = "{tmp_path}/u0.ckpt"')
        assert main(["run", write(tmp_path, text, extra="")]) == EXIT_CONFIG

    def test_invalid_config_exit_2(self, tmp_path, capsys):
        cfg = write(tmp_path, 'scenario = "conserve"\ngrid.dimension = 1\ngrid.points = 100\n'
                               "grid.half_width = 20.0\nmodel.b = 0.6\ntime.dt0 = 1e-4\nfoo = 1\n")
        assert main(["run", cfg]) == EXIT_CONFIG
        err = capsys.readouterr().err
        for frag in ("grid.points", "b must satisfy", "time.t_end", "unknown key 'foo'"):
            assert frag in err

    def test_missing_file_exit_2(self, tmp_path):
        assert main(["run", str(tmp_path / "absent.toml")]) == EXIT_CONFIG

    def test_non_finite_exit_3(self, tmp_path):
        text = CONSERVE.replace("init.amplitude = 0.4", "init.amplitude = 1e38")
        assert main(["run", write(tmp_path, text, extra="")]) == EXIT_NONFINITE

    def test_blowup_with_positive_energy_exits_0(self, tmp_path, capsys):
        text = CONSERVE.replace('"conserve"', '"blowup"').replace("init.amplitude = 0.4", "init.amplitude = 0.2")
        text = text.replace("time.t_end = 0.04", "time.t_end = 0.02\nvirial.calibrate = false")
        assert main(["run", write(tmp_path, text, extra="")]) == EXIT_PASS
        out = capsys.readouterr().out
        assert "verdict: NoBlowupDetected" in out or "verdict: Inconclusive" in out

    def test_k_too_small_is_config_error(self, tmp_path):
        text = 'scenario = "cutoff-audit"\nmodel.b = 0.3\ncutoff.k = 3\n'
        assert main(["audit", "cutoff", write(tmp_path, text)]) == EXIT_CONFIG


class TestAudits:
    def test_cutoff_audit(self, tmp_path, capsys):
        text = ('scenario = "cutoff-audit"\nmodel.b = 0.3\ncutoff.R = [4, 8, 16, 32]\n'
                'output.csv = "{out}/cut.csv"\n')
        assert main(["audit", "cutoff", write(tmp_path, text)]) == EXIT_PASS
        assert (tmp_path / "out" / "cut.csv").exists()

    def test_riccati_run(self, tmp_path):
        text = 'scenario = "riccati"\nriccati.c = [3.0]\nriccati.y0 = [0.2]\nriccati.random_cases = 3\n'
        res = run_scenario(config_from_dict({"scenario": "riccati", "riccati": {"c": [3.0], "y0": [0.2]}}))
        assert res.passed and len(res.table) == 11
        assert main(["run", write(tmp_path, text)]) == EXIT_PASS


SWEEP = {
    "scenario": "sweep",
    "grid": {"dimension": 1, "points": 128, "half_width": 20.0},
    "model": {"b": 0.3, "nu": 1.0},
    "init": {"width": 1.0},
    "time": {"dt0": 1e-4, "t_end": 0.005},
    "sweep": {"amplitudes": [0.3, 0.3], "b": [0.3, 0.7], "nu": [1.0]},
}


class TestSweep:
    def test_cells_independent_and_deterministic(self):
        res = run_sweep(config_from_dict(SWEEP), threads=2)
        rows = {(r[0], r[1]): r for r in res.table}
        assert len(res.table) == 4
        bad = [r for r in res.table if r[1] == 0.7]
        assert all(r[4] == "ConfigInvalid" for r in bad)
        good = [r for r in res.table if r[1] == 0.3]
        assert good[0] == good[1]
        assert good[0][4] == "NoBlowupDetected"
        assert rows

    def test_csv_columns(self, tmp_path):
        d = dict(SWEEP, output={"csv": str(tmp_path / "sw.csv")})
        run_sweep(config_from_dict(d), threads=1)
        header = (tmp_path / "sw.csv").read_text().splitlines()[0].split(",")
        assert tuple(header) == SWEEP_COLUMNS
        assert (tmp_path / "sw.csv.cell0.csv").exists()

    def test_thread_count_does_not_change_table(self, tmp_path):
        a = run_sweep(config_from_dict(SWEEP), threads=1).table
        b = run_sweep(config_from_dict(SWEEP), threads=4).table
        assert a == b or all(x[:5] == y[:5] for x, y in zip(a, b))

    def test_thread_cap_env(self, monkeypatch):
        monkeypatch.setenv("IBNLS_THREADS", "3")
        assert thread_cap() == 3
        monkeypatch.setenv("IBNLS_THREADS", "zero")
        from ibnls.errors import ConfigInvalid

        with pytest.raises(ConfigInvalid):
            thread_cap()

    def test_cli_sweep(self, tmp_path, monkeypatch):
        monkeypatch.setenv("IBNLS_THREADS", "1")
        text = ('scenario = "sweep"\ngrid.dimension = 1\ngrid.points = 128\ngrid.half_width = 20.0\n'
                "model.b = 0.3\nmodel.nu = 1.0\ntime.dt0 = 1e-4\ntime.t_end = 0.002\n"
                'sweep.amplitudes = [0.3]\noutput.csv = "{out}/sw.csv"\n')
        assert main(["sweep", write(tmp_path, text)]) == EXIT_PASS
