import math

import numpy as np
import pytest

from conftest import gaussian
from ibnls.analysis import (
    FINITE_TIME,
    INCONCLUSIVE,
    INFINITE_TIME_GROWTH,
    NO_BLOWUP,
    BlowupThresholds,
    CorpusSummary,
    InequalityProbe,
    RadialProfile,
    bounded_spread,
    classify_blowup,
    fit_power_law,
    gn_exterior_ratio,
    gn_ratio,
    interpolation_probe,
    radial_laplacian,
    radial_probe_oracle,
    riccati_blowup_time,
    sphere_area,
    write_corpus_csv,
)
from ibnls.cutoff import Phi2, build_chi
from ibnls.errors import CaseDimensionMismatch, InsufficientData, NonPositiveInput, ZeroField
from ibnls.fields import ModelParams
from ibnls.grid import GridSpec, build_grid
from ibnls.runner import gn_corpus, random_band_limited


class TestGN:
    def test_pure_mode(self, grid1):
        k = grid1.k[0][7]
        assert gn_ratio(grid1.field(np.exp(1j * k * grid1.x[0]))) == pytest.approx(1.0, rel=1e-13)

    def test_random_fields_bounded(self, rng, grid1, grid2):
        for i in range(40):
            u = random_band_limited(grid1 if i % 2 else grid2, rng)
            assert gn_ratio(u) <= math.sqrt(2) + 1e-6

    def test_corpus_helper(self):
        assert gn_corpus(0, 10).max() <= math.sqrt(2) + 1e-6

    def test_zero_field(self, grid1):
        with pytest.raises(ZeroField):
            gn_ratio(grid1.field(np.zeros(grid1.shape)))

    def test_exterior_at_zero_radius(self, grid2):
        u = gaussian(grid2, 1.0, 1.0, kick=[0.5, 0.0])
        assert gn_exterior_ratio(u, 0.0) == gn_ratio(u)

    def test_exterior_of_compactly_supported(self, grid2):
        vals = np.where(grid2.r < 2.0, 1.0, 0.0)
        with pytest.raises(ZeroField):
            gn_exterior_ratio(grid2.field(vals), 3.0)

    def test_shifted_gaussians_stay_within_factor_two(self):
        g = build_grid(GridSpec(2, 128, 12.0))
        ratios = []
        for R in (1.0, 2.0, 4.0):
            c = 1.5 * R
            vals = np.exp(-((g.mesh[0] - c) ** 2 + g.mesh[1] ** 2) / 2.0)
            ratios.append(gn_exterior_ratio(g.field(vals), R))
        assert max(ratios) / min(ratios) < 2.0


class TestRadial:
    def test_sphere_area(self):
        assert sphere_area(1) == pytest.approx(2.0)
        assert sphere_area(2) == pytest.approx(2 * math.pi)
        assert sphere_area(3) == pytest.approx(4 * math.pi)

    @pytest.mark.parametrize("N", [4, 5])
    def test_gaussian_laplacian(self, N):
        p = RadialProfile.sample(N, 12.0, 4000, lambda r: np.exp(-r * r / 2))
        exact = (p.r ** 2 - N) * np.exp(-p.r ** 2 / 2)
        assert np.max(np.abs(radial_laplacian(p) - exact)) < 1e-8


class TestInterpolationProbe:
    @pytest.mark.parametrize("N", [1, 2, 3])
    def test_homogeneity_on_grid(self, N):
        g = build_grid({1: GridSpec(1, 512, 16.0), 2: GridSpec(2, 64, 10.0), 3: GridSpec(3, 32, 8.0)}[N])
        p = ModelParams(N, 0.3 if N == 1 else 0.9)
        spec = build_chi(8, p.b, N, R=1.0)
        u = gaussian(g, 1.0, 1.0, center=[1.5] + [0.0] * (N - 1))
        psi = Phi2(spec, g.r)
        r1 = interpolation_probe(u, psi, p).ratio
        r2 = interpolation_probe(g.field(5.3 * u.values), psi, p).ratio
        assert r1 > 0 and abs(r2 / r1 - 1) < 1e-10

    @pytest.mark.parametrize("N", [4, 5])
    def test_homogeneity_radial(self, N):
        p = ModelParams(N, 1.0)
        prof = RadialProfile.sample(N, 12.0, 2000, lambda r: np.exp(-r * r / 2))
        psi = Phi2(build_chi(8, 1.0, N, R=1.0), prof.r)
        r1 = interpolation_probe(prof, psi, p).ratio
        r2 = interpolation_probe(prof.with_values(0.2 * prof.values), psi, p).ratio
        assert abs(r2 / r1 - 1) < 1e-10

    def test_zero_psi(self, grid1):
        pr = interpolation_probe(gaussian(grid1), np.zeros(grid1.shape), ModelParams(1, 0.3))
        assert pr.lhs == 0 and pr.ratio == 0

    def test_radial_oracle_n5(self):
        N, b = 5, 1.0
        spec = build_chi(8, b, N, R=1.0)
        prof = RadialProfile.sample(N, 12.0, 8000, lambda r: np.exp(-r * r / 2))
        probe = interpolation_probe(prof, Phi2(spec, prof.r), ModelParams(N, b))
        ref = radial_probe_oracle(N, b, spec, 1.0, 1.0, 12.0, 16 * 8000)
        assert abs(probe.ratio / ref.ratio - 1) < 1e-4

    def test_case_mismatch(self, grid1):
        with pytest.raises(CaseDimensionMismatch):
            interpolation_probe(gaussian(grid1), np.ones(grid1.shape), ModelParams(1, 0.3), "n=2")
        with pytest.raises(CaseDimensionMismatch):
            interpolation_probe(gaussian(grid1), np.ones(grid1.shape), ModelParams(2, 0.3))

    def test_negative_psi(self, grid1):
        with pytest.raises(ValueError):
            interpolation_probe(gaussian(grid1), -np.ones(grid1.shape), ModelParams(1, 0.3))

    def test_probe_validation(self):
        with pytest.raises(ValueError):
            InequalityProbe("n=1", -1.0, 1.0)
        assert InequalityProbe("n=1", 1.0, 0.0).ratio == math.inf


class TestCorpusHelpers:
    def test_bounded_spread(self):
        assert bounded_spread([1, 2, 3])
        assert not bounded_spread([1, 1, 100])
        assert not bounded_spread([1, np.nan, 2])

    def test_csv(self, tmp_path):
        path = tmp_path / "c.csv"
        write_corpus_csv(path, [CorpusSummary("n=1", np.array([1.0, 2.0, 4.0]), True)])
        lines = path.read_text().splitlines()
        assert lines[0] == "case,min,median,max,PASS"
        assert lines[1] == "n=1,1,2,4,PASS"


class TestRiccati:
    @pytest.mark.parametrize("c,y0,T", [(1, 1, 1.0), (2, 0.5, 1.0), (3, 0.2, 5 / 3)])
    def test_escape_times(self, c, y0, T):
        res = riccati_blowup_time(c, y0)
        assert res.closed_form == pytest.approx(T, rel=1e-15)
        assert res.relative_error < 0.01

    def test_first_order_in_threshold(self):
        errs = [riccati_blowup_time(1.0, 1.0, threshold=th).relative_error for th in (1e3, 1e4)]
        assert errs[0] / errs[1] == pytest.approx(10.0, rel=0.05)

    def test_extreme_scales(self):
        assert riccati_blowup_time(1e6, 1e-9).relative_error < 0.01
        assert riccati_blowup_time(1e-5, 1e4).relative_error < 0.01

    def test_nonpositive(self):
        with pytest.raises(NonPositiveInput):
            riccati_blowup_time(0.0, 1.0)


class TestPowerLaw:
    t = np.linspace(0, 50, 200)

    def test_exact_square(self):
        beta, res = fit_power_law(self.t, (1 + self.t) ** 2)
        assert beta == pytest.approx(2.0, abs=1e-6) and res < 1e-10

    def test_constant(self):
        assert fit_power_law(self.t, np.full_like(self.t, 3.0))[0] == pytest.approx(0.0, abs=1e-12)

    def test_noisy(self):
        rng = np.random.default_rng(7)
        t = np.linspace(1, 1000, 400)
        v = t ** 2 * (1 + 0.05 * rng.standard_normal(t.size))
        assert 1.9 <= fit_power_law(t, v)[0] <= 2.1

    def test_errors(self):
        with pytest.raises(InsufficientData):
            fit_power_law([0, 1], [1, 2])
        with pytest.raises(NonPositiveInput):
            fit_power_law(self.t, -np.ones_like(self.t))


def series(t, dt, lap, halt=None):
    return {"t": np.asarray(t), "dt": np.asarray(dt), "lap_norm": np.asarray(lap), "halt_reason": halt}


class TestClassify:
    t = np.linspace(0, 1, 50)

    def test_finite_time(self):
        dt = np.geomspace(1e-4, 1e-11, 50)
        v = classify_blowup(series(self.t, dt, np.linspace(1, 12, 50), "DtFloorReached"))
        assert v.kind == FINITE_TIME and v.growth == pytest.approx(12.0)

    def test_infinite_time(self):
        t = np.linspace(0, 100, 200)
        v = classify_blowup(series(t, np.full(200, 1e-3), (1 + t) ** 2, "TEnd"))
        assert v.kind == INFINITE_TIME_GROWTH and v.beta == pytest.approx(2.0)

    def test_no_blowup(self):
        assert classify_blowup(series(self.t, np.full(50, 1e-3), np.ones(50), "TEnd")).kind == NO_BLOWUP

    def test_floor_with_small_growth_is_inconclusive(self):
        v = classify_blowup(series(self.t, np.geomspace(1e-4, 1e-11, 50), np.linspace(1, 3, 50), "DtFloorReached"))
        assert v.kind == INCONCLUSIVE

    def test_monotone_in_growth(self):
        dt = np.geomspace(1e-4, 1e-11, 50)
        kinds = [classify_blowup(series(self.t, dt, np.linspace(1, G, 50), "DtFloorReached")).kind
                 for G in (2, 5, 10, 20, 100)]
        first = kinds.index(FINITE_TIME)
        assert all(k == FINITE_TIME for k in kinds[first:])
        assert NO_BLOWUP not in kinds

    def test_thresholds_configurable(self):
        dt = np.geomspace(1e-4, 1e-9, 50)
        s = series(self.t, dt, np.linspace(1, 12, 50))
        assert classify_blowup(s).kind != FINITE_TIME
        assert classify_blowup(s, BlowupThresholds(dt_floor=1e-9)).kind == FINITE_TIME

    def test_empty(self):
        with pytest.raises(InsufficientData):
            classify_blowup(series([], [], []))
