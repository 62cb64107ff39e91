import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import poisson

from jcpackets.analysis import (WIGNER_BOUND, detect_packets, hermite_functions, local_abs_max,
                                packets_to_jsonl, peak_report, spectrum, wigner, wigner_at,
                                wigner_laguerre, wigner_max_track)
from jcpackets.errors import LostTrack, NoPeak
from jcpackets.model import FockState, coherent_amplitudes, make_initial_state


def coherent(z, n_max, tls=(1.0, 0.0)):
    c = coherent_amplitudes(z, n_max)
    return FockState.from_ladders(tls[0] * c, tls[1] * c)


def rho_of(state):
    return sum(np.outer(v, v.conj()) for v in (state.amps_g, state.amps_x))


class TestWigner:
    def test_vacuum(self):
        z = np.array([0, 0.3, 0.5j, -0.4 + 0.2j])
        w = wigner_at(make_initial_state("lds_plus", 10), z)
        assert np.allclose(w, WIGNER_BOUND * np.exp(-2 * np.abs(z) ** 2), atol=1e-12)

    def test_zero_four_superposition(self):
        c = np.zeros(9, dtype=complex)
        c[0] = c[4] = 1 / math.sqrt(2)
        s = FockState.from_ladders(c, np.zeros(9))
        assert wigner_at(s, np.array([0j]))[0] == pytest.approx(WIGNER_BOUND)
        pts = np.array([0.2, 0.7j, 1.1 - 0.4j, -0.6 + 0.9j])
        assert np.allclose(wigner_at(s, pts), wigner_laguerre(rho_of(s), pts), atol=1e-12)

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 2**16))
    def test_matches_laguerre_series(self, seed):
        rng = np.random.default_rng(seed)
        v = rng.normal(size=(2, 13)) + 1j * rng.normal(size=(2, 13))
        s = FockState.from_ladders(*(v / np.linalg.norm(v)))
        pts = rng.uniform(-1.5, 1.5, 6) + 1j * rng.uniform(-1.5, 1.5, 6)
        assert np.allclose(wigner_at(s, pts), wigner_laguerre(rho_of(s), pts), atol=1e-10)

    def test_large_amplitude_coherent(self):
        z0 = 20 - 19j
        s = coherent(z0, 1000)
        pts = z0 + np.array([0, 0.3, 0.3j])
        assert np.allclose(wigner_at(s, pts), WIGNER_BOUND * np.exp(-2 * np.abs(pts - z0) ** 2),
                           atol=1e-9)

    def test_grid_normalized_and_bounded(self):
        s = FockState.from_ladders(0.6 * coherent_amplitudes(2 + 1j, 60),
                                   0.8 * coherent_amplitudes(-1.5j, 60))
        grid = wigner(s, points=121)
        assert grid.integral() == pytest.approx(1.0, abs=1e-2)
        assert np.max(np.abs(grid.values)) <= WIGNER_BOUND + 1e-12
        assert np.isrealobj(grid.values)

    def test_cat_state_has_negative_region(self):
        c = coherent_amplitudes(2.0, 50) + coherent_amplitudes(-2.0, 50)
        s = FockState.from_ladders(c / np.linalg.norm(c), np.zeros(51))
        grid = wigner(s, half_width=4.0, points=81)
        assert grid.values.min() < -0.1
        assert abs(grid.values.min()) <= WIGNER_BOUND + 1e-12

    def test_grid_csv_and_argmax(self, tmp_path):
        grid = wigner(coherent(1 - 1j, 40), half_width=3.0, points=61)
        assert grid.argmax_abs() == pytest.approx(1 - 1j, abs=0.06)
        grid.to_csv(tmp_path / "w.csv")
        data = np.genfromtxt(tmp_path / "w.csv", delimiter=",", names=True)
        assert data.size == 61 * 61 and data.dtype.names == ("re", "im", "W")

    def test_hermite_orthonormal(self):
        x = np.linspace(-30, 30, 6001)
        h = hermite_functions(120, x)
        gram = h @ h.T * (x[1] - x[0])
        assert np.allclose(gram, np.eye(121), atol=1e-10)


class TestTracking:
    def test_coherent_maximum(self):
        z0 = 3.21 - 1.87j
        assert local_abs_max(coherent(z0, 80), 3 - 2j) == pytest.approx(z0, abs=2e-3)

    def test_static_track(self):
        s = coherent(2 + 2j, 60)
        tr = wigner_max_track([s, s, s], [0, 1, 2], [2.1 + 1.9j])[0]
        assert np.allclose(tr.as_array(), 2 + 2j, atol=2e-3)
        assert tr.times == [0.0, 1.0, 2.0]

    def test_two_packets_followed(self):
        frames = []
        zs = [(3 + 0.2 * k * 1j, -3 - 0.2 * k) for k in range(4)]
        for a, b in zs:
            frames.append(FockState.from_ladders(coherent_amplitudes(a, 80) / math.sqrt(2),
                                                 coherent_amplitudes(b, 80) / math.sqrt(2)))
        tracks = wigner_max_track(frames, range(4), [3, -3])
        assert np.allclose(tracks[0].as_array(), [a for a, _ in zs], atol=5e-3)
        assert np.allclose(tracks[1].as_array(), [b for _, b in zs], atol=5e-3)

    def test_radius_expands_on_jump(self):
        frames = [coherent(z, 60) for z in (0j, 1.0 + 0j, 2.0 + 0j)]
        with pytest.raises(LostTrack):
            wigner_max_track(frames, range(3), [0j])
        tr = wigner_max_track(frames, range(3), [0j], max_radius=1.5)[0]
        assert np.allclose(tr.as_array(), [0, 1, 2], atol=2e-3)

    def test_lost(self):
        with pytest.raises(LostTrack):
            local_abs_max(coherent(0j, 30), 4 + 0j)


def mixture(means, weights, size=120):
    n = np.arange(size)
    return sum(w * poisson.pmf(n, m) for m, w in zip(means, weights))


class TestPackets:
    def test_single(self):
        pk, res = detect_packets(mixture([10], [1]))
        assert len(pk) == 1
        assert pk[0].center == pytest.approx(10, abs=1e-6)
        assert pk[0].mass == pytest.approx(1.0, abs=1e-9)

    def test_two(self):
        pn = mixture([5, 40], [0.5, 0.5])
        pk, res = detect_packets(pn)
        assert [round(p.center) for p in pk] == [5, 40]
        assert [p.mass for p in pk] == pytest.approx([0.5, 0.5], abs=1e-3)
        assert sum(p.mass for p in pk) + res == pytest.approx(pn.sum(), abs=1e-15)

    def test_small_bump_ignored(self):
        pk, _ = detect_packets(mixture([10, 60], [0.995, 0.005]))
        assert len(pk) == 1

    def test_empty(self):
        pk, res = detect_packets(np.zeros(20))
        assert pk == [] and res == 0.0

    def test_jsonl(self):
        pk, _ = detect_packets(mixture([5, 40], [0.5, 0.5]))
        lines = packets_to_jsonl(pk, time=40.0).splitlines()
        assert len(lines) == 2
        assert json.loads(lines[1])["t"] == 40.0


class TestSpectrum:
    t = np.arange(10000) * 0.1

    def test_single_tone(self):
        sp = spectrum(np.cos(0.1 * self.t), self.t)
        assert sp.bin_width == pytest.approx(2 * math.pi / 1000)
        assert np.allclose(np.diff(sp.freqs), sp.bin_width)
        k = np.argmax(sp.magnitudes)
        assert abs(sp.freqs[k] - 0.1) <= sp.bin_width
        assert np.all(sp.magnitudes >= 0)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**16), n=st.integers(16, 600))
    def test_parseval(self, seed, n):
        x = np.random.default_rng(seed).normal(size=n)
        sp = spectrum(x, np.arange(n) * 0.3)
        xm = x - x.mean()
        assert sp.one_sided_power() == pytest.approx(np.mean(xm ** 2), rel=1e-8)

    def test_two_tone_report(self):
        w1, w2 = 14 * 2 * math.pi / 1000, 20 * 2 * math.pi / 1000
        x = 2.0 * np.cos(w1 * self.t) + np.cos(w2 * self.t)
        rep = peak_report(spectrum(x, self.t), [w1, w2])
        assert [m.offset_bins for m in rep.matches] == pytest.approx([0, 0], abs=1e-9)
        assert rep.ratio == pytest.approx(2.0)
        assert not rep.low_confidence

    def test_no_peak(self):
        sp = spectrum(np.cos(0.1 * self.t), self.t)
        with pytest.raises(NoPeak):
            peak_report(sp, [0.5])

    def test_broad_peak_flagged(self):
        x = np.cos(0.1 * self.t) * np.exp(-self.t / 40.0)
        rep = peak_report(spectrum(x, self.t), [0.1])
        assert rep.low_confidence

    def test_hann_and_errors(self, tmp_path):
        sp = spectrum(np.cos(0.1 * self.t), self.t, window="hann")
        assert abs(sp.freqs[np.argmax(sp.magnitudes)] - 0.1) <= sp.bin_width
        sp.to_csv(tmp_path / "s.csv")
        assert (tmp_path / "s.csv").read_text().startswith("freq,magnitude\n")
        with pytest.raises(ValueError):
            spectrum([1.0, 2.0], [0.0, 1.0], window="kaiser")
        with pytest.raises(ValueError):
            spectrum([1.0, 2.0, 3.0], [0.0, 1.0, 3.0])
