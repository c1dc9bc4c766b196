import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stlsim.bands import (
    P_REF,
    NarrowbandSpectrum,
    band,
    band_rms,
    energy_avg_level,
    required_sources,
    reverberation_bound,
    room_band_levels,
    stl,
    stl_spectrum,
    third_octave_bands,
)


class TestBands:
    def test_kilohertz_band(self):
        b = band(0)
        assert b.f_m == 1000.0
        assert b.f_l == pytest.approx(891.25, abs=5e-3)
        assert b.f_u == pytest.approx(1122.02, abs=5e-3)

    def test_plotted_range(self):
        bands = third_octave_bands(8, 630)
        assert len(bands) == 20
        assert [b.nominal for b in bands][:3] == [8, 10, 12.5]
        assert bands[-1].nominal == 630

    def test_small_scale_range(self):
        assert third_octave_bands(8, 800)[-1].nominal == 800

    def test_empty_range(self):
        assert third_octave_bands(100, 50) == []
        assert third_octave_bands(0, 50) == []

    @given(st.integers(-40, 20))
    def test_band_invariants(self, n):
        b = band(n)
        assert b.f_l < b.f_m < b.f_u
        assert b.f_u / b.f_l == pytest.approx(10 ** 0.1, rel=1e-9)
        assert b.f_m == pytest.approx(math.sqrt(b.f_l * b.f_u), rel=1e-9)
        assert band(n + 1).f_l == b.f_u

    @given(st.integers(-40, 10))
    def test_decade(self, n):
        assert band(n + 10).f_m / band(n).f_m == pytest.approx(10.0, rel=1e-9)

    def test_nominal_labels(self):
        assert [band(n).nominal for n in range(-15, -9)] == [31.5, 40, 50, 63, 80, 100]
        assert band(-21).nominal == 8


class TestBandRms:
    def _spec(self, f, p):
        return NarrowbandSpectrum(np.asarray(f, float), np.atleast_2d(p))

    def test_single_line(self):
        s = self._spec([1000.0], [1.0])
        assert band_rms(s, band(0), 0) == pytest.approx(1 / math.sqrt(2))

    def test_two_lines(self):
        s = self._spec([950.0, 1050.0], [1.0, 1.0j])
        assert band_rms(s, band(0), 0) == pytest.approx(1.0)

    def test_empty_band_flagged(self):
        s = self._spec([10.0], [1.0])
        assert math.isnan(band_rms(s, band(0), 0))

    def test_half_open_edges(self):
        b = band(0)
        s = self._spec([b.f_l, b.f_u], [1.0, 1.0])
        assert band_rms(s, b, 0) == pytest.approx(1 / math.sqrt(2))
        assert band_rms(s, band(1), 0) == pytest.approx(1 / math.sqrt(2))

    @given(st.floats(1e-3, 1e3))
    def test_homogeneity(self, scale):
        s = self._spec([900.0, 1000.0, 1100.0], [0.3, 1 + 1j, -2.0])
        s2 = self._spec([900.0, 1000.0, 1100.0], scale * np.array([0.3, 1 + 1j, -2.0]))
        assert band_rms(s2, band(0), 0) == pytest.approx(scale * band_rms(s, band(0), 0), rel=1e-12)

    def test_all_mics(self):
        s = NarrowbandSpectrum([1000.0], [[1.0], [2.0]])
        np.testing.assert_allclose(band_rms(s, band(0)), [1 / math.sqrt(2), math.sqrt(2)])

    def test_validation(self):
        with pytest.raises(ValueError):
            NarrowbandSpectrum([2.0, 1.0], [[1.0, 1.0]])
        with pytest.raises(ValueError):
            NarrowbandSpectrum([1.0, 2.0], [[1.0]])

    @settings(max_examples=1000, deadline=None)
    @given(
        st.integers(5, 60),
        st.integers(0, 2**31 - 1),
    )
    def test_parseval_partition(self, n, seed):
        rng = np.random.default_rng(seed)
        bands = third_octave_bands(10, 1000)
        lo, hi = bands[0].f_l, bands[-1].f_u
        f = np.sort(rng.uniform(lo, hi, n))
        f = np.unique(f)
        p = rng.normal(size=f.size) + 1j * rng.normal(size=f.size)
        s = NarrowbandSpectrum(f, p[None, :])
        total = sum(np.nan_to_num(band_rms(s, b, 0)) ** 2 for b in bands)
        assert total == pytest.approx(0.5 * np.sum(np.abs(p) ** 2), rel=1e-12)


class TestLevels:
    def test_reference(self):
        assert energy_avg_level([P_REF]) == pytest.approx(0.0, abs=1e-12)

    def test_identical(self):
        assert energy_avg_level([0.2] * 5) == pytest.approx(20 * math.log10(0.2 / P_REF))

    def test_example(self):
        assert energy_avg_level([P_REF, P_REF * math.sqrt(3)]) == pytest.approx(3.0103, abs=1e-4)

    def test_zero_sentinel(self):
        assert energy_avg_level([0.0, 0.0]) == -math.inf

    def test_invalid(self):
        with pytest.raises(ValueError):
            energy_avg_level([])
        with pytest.raises(ValueError):
            energy_avg_level([-1.0])

    @settings(max_examples=1000, deadline=None)
    @given(
        arrays(float, st.integers(1, 12), elements=st.floats(1e-6, 1e3)),
        st.floats(1e-3, 1e3),
        st.randoms(use_true_random=False),
    )
    def test_permutation_and_scaling(self, p, s, rnd):
        L = energy_avg_level(p)
        q = list(p)
        rnd.shuffle(q)
        assert energy_avg_level(q) == pytest.approx(L, abs=1e-9)
        assert energy_avg_level(s * p) == pytest.approx(L + 20 * math.log10(s), abs=1e-9)


class TestStl:
    def test_difference(self):
        assert stl(50.0, 30.0) == 20.0

    def test_correction(self):
        assert stl(50.0, 30.0, 10.0, 10.0, True) == 20.0
        assert stl(50.0, 30.0, 100.0, 10.0, True) == pytest.approx(30.0, abs=1e-12)

    def test_correction_domain(self):
        with pytest.raises(ValueError):
            stl(50.0, 30.0, 0.0, 10.0, True)
        with pytest.raises(ValueError):
            stl(50.0, 30.0, None, None, True)

    def test_correction_ignored_when_off(self):
        assert stl(50.0, 30.0, 100.0, 10.0) == 20.0

    @given(st.floats(-200, 200), st.floats(-200, 200))
    def test_antisymmetry(self, a, b):
        assert stl(a, b) == -stl(b, a)


class TestFacilityRules:
    def test_reverberation_bound(self):
        assert reverberation_bound(1.5, 60.0)
        assert 2 * 1.2 ** (2 / 3) == pytest.approx(2.2579, abs=1e-3)
        assert reverberation_bound(1.0, 50.0)
        assert reverberation_bound(2.0, 50.0)
        assert not reverberation_bound(2.5, 50.0)
        assert not reverberation_bound(0.9, 500.0)

    def test_required_sources(self):
        assert required_sources(60.0) == 10
        assert required_sources(152.0**1.5) == 1

    @given(st.floats(1.0, 1e4), st.floats(1.0, 1e4))
    def test_sources_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert required_sources(lo) >= required_sources(hi)


class TestStlSpectrum:
    def test_pipeline_and_csv(self, tmp_path):
        f = np.arange(80.0, 130.0)
        src = NarrowbandSpectrum(f, np.ones((2, f.size)))
        rcv = NarrowbandSpectrum(f, 0.1 * np.ones((3, f.size)))
        bands = third_octave_bands(80, 125)
        spec = stl_spectrum(src, rcv, bands)
        # the 80 Hz band starts below the swept range but still has lines
        assert [b.nominal for b in spec.bands] == [80, 100, 125]
        np.testing.assert_allclose(spec.levels, 20.0)
        spec.to_csv(tmp_path / "stl.csv")
        lines = (tmp_path / "stl.csv").read_text().splitlines()
        assert lines[0] == "f_nominal,f_l,f_m,f_u,level_dB"
        assert len(lines) == 4

    def test_missing_band_reported(self):
        f = np.array([100.0, 101.0])
        s = NarrowbandSpectrum(f, np.ones((1, 2)))
        spec = stl_spectrum(s, s, third_octave_bands(80, 125))
        assert [b.nominal for b in spec.bands] == [100]
        assert len(spec.missing) == 2

    def test_room_levels(self):
        f = np.array([1000.0])
        s = NarrowbandSpectrum(f, np.array([[P_REF * math.sqrt(2)], [P_REF * math.sqrt(2)]]))
        np.testing.assert_allclose(room_band_levels(s, [band(0)]), [0.0], atol=1e-12)
