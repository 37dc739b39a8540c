import numpy as np
import pytest

from conftest import gaussian
from ibnls.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from ibnls.grid import GridSpec, build_grid


class TestCheckpoint:
    @pytest.mark.parametrize("spec", [GridSpec(1, 64, 5.0), GridSpec(2, 32, 4.0), GridSpec(3, 16, 3.0)])
    def test_round_trip(self, tmp_path, rng, spec):
        g = build_grid(spec)
        u = g.field(rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))
        path = tmp_path / "sub" / "u.ckpt"
        save_checkpoint(path, u, 0.125, 3e-7)
        cp = load_checkpoint(path)
        assert cp.u.grid.spec == spec
        assert np.max(np.abs(cp.u.values - u.values)) <= 1e-15
        assert cp.t == 0.125 and cp.dt == 3e-7

    def test_spectral_input_saved_physical(self, tmp_path, grid1):
        u = gaussian(grid1, 1.0, 1.0, kick=[0.3])
        save_checkpoint(tmp_path / "u.ckpt", u.spectral(), 0.0, 1e-4)
        np.testing.assert_allclose(load_checkpoint(tmp_path / "u.ckpt").u.values, u.values, atol=1e-15)

    def test_layout(self, tmp_path):
        g = build_grid(GridSpec(1, 8, 1.0))
        save_checkpoint(tmp_path / "u.ckpt", g.field(np.arange(8) + 0.5j), 1.0, 2.0)
        raw = (tmp_path / "u.ckpt").read_bytes()
        assert raw.startswith(MAGIC)
        assert len(raw) == len(MAGIC) + 4 + 4 + 8 * 3 + 16 * 8

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.ckpt"
        p.write_bytes(b"NOTACKPT" + bytes(64))
        with pytest.raises(ValueError):
            load_checkpoint(p)

    def test_truncated(self, tmp_path):
        g = build_grid(GridSpec(1, 64, 5.0))
        p = tmp_path / "u.ckpt"
        save_checkpoint(p, g.field(np.ones(64)), 0.0, 1.0)
        p.write_bytes(p.read_bytes()[:-16])
        with pytest.raises(ValueError):
            load_checkpoint(p)
