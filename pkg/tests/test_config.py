import pytest

from ibnls.config import RunConfig, config_from_dict, parse_config
from ibnls.errors import ConfigInvalid


def minimal(**over):
    d = {
        "scenario": "conserve",
        "grid": {"dimension": 1, "points": 512, "half_width": 20.0},
        "model": {"b": 0.3, "nu": 1.0},
        "time": {"dt0": 1e-4, "t_end": 0.5},
    }
    for key, val in over.items():
        sect, _, name = key.partition("__")
        if name:
            d.setdefault(sect, {})[name] = val
        else:
            d[sect] = val
    return d


def violations(data):
    with pytest.raises(ConfigInvalid) as exc:
        config_from_dict(data)
    return exc.value.violations


class TestDefaults:
    def test_minimal_fills_defaults(self):
        cfg = config_from_dict(minimal())
        assert isinstance(cfg, RunConfig)
        assert cfg.cutoff.k == 8 and cfg.cutoff.R == (8.0,)
        assert cfg.time.cfl == 0.5 and cfg.time.dt_floor == 1e-10
        assert cfg.epsilon == pytest.approx(0.5 * 40.0 / 512)
        assert cfg.output.cadence == 100
        assert cfg.time.adaptive is False

    def test_blowup_defaults_adaptive(self):
        assert config_from_dict(minimal(scenario="blowup")).time.adaptive is True

    def test_static_scenarios_need_no_grid(self):
        cfg = config_from_dict({"scenario": "cutoff-audit"})
        assert cfg.scenario == "cutoff-audit"
        config_from_dict({"scenario": "riccati", "riccati": {"c": [1.0], "y0": [2.0]}})

    def test_epsilon_override(self):
        assert config_from_dict(minimal(model__epsilon=0.1)).epsilon == 0.1


class TestViolations:
    def test_b_out_of_range(self):
        v = violations(minimal(model__b=0.6))
        assert any("b < min" in m or "0 < b < min" in m for m in v)

    def test_missing_t_end(self):
        d = minimal()
        del d["time"]["t_end"]
        assert any("time.t_end" in m for m in violations(d))

    def test_every_violation_reported(self):
        d = minimal(model__b=3.0, grid__points=100, output__cadence=0, bogus=1)
        v = violations(d)
        assert len(v) >= 4
        joined = "\n".join(v)
        for frag in ("points", "cadence", "unknown key 'bogus'", "b must satisfy"):
            assert frag in joined

    def test_wrong_type(self):
        assert any("grid.points" in m for m in violations(minimal(grid__points="many")))

    def test_bad_scenario(self):
        assert any("scenario" in m for m in violations(minimal(scenario="fly")))

    def test_vector_lengths(self):
        assert any("init.center" in m for m in violations(minimal(init={"center": [1.0, 2.0]})))

    def test_floor_above_dt0(self):
        assert any("dt_floor" in m for m in violations(minimal(time={"dt0": 1e-4, "t_end": 1.0, "dt_floor": 1e-3})))

    def test_unwritable_output(self, tmp_path):
        d = minimal(output={"csv": str(tmp_path / "missing" / "deeper" / "x.csv")})
        blocker = tmp_path / "missing"
        blocker.write_text("a file, not a directory")
        assert any("not writable" in m for m in violations(d))

    def test_checkpoint_init_requires_path(self):
        assert any("init.checkpoint" in m for m in violations(minimal(init={"type": "custom-checkpoint"})))


class TestFiles:
    def test_parse_toml(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text('scenario = "conserve"\ngrid.dimension = 1\ngrid.points = 256\ngrid.half_width = 10.0\n'
                     'model.b = 0.3\ntime.dt0 = 1e-4\ntime.t_end = 0.1\n')
        cfg = parse_config(p)
        assert cfg.grid.points == 256 and cfg.source == str(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigInvalid):
            parse_config(tmp_path / "nope.toml")

    def test_syntax_error(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text("scenario = \n")
        with pytest.raises(ConfigInvalid):
            parse_config(p)

    def test_shipped_configs_parse(self):
        from pathlib import Path

        root = Path(__file__).resolve().parents[1] / "configs"
        files = sorted(root.glob("*.toml"))
        assert files
        for f in files:
            parse_config(f)
