import numpy as np
import pytest

from osadetect import wavelets as wv


def oracle_dwt_level(x, wavelet_name, level):
    """Direct-convolution filter-bank oracle: explicit padding and loops."""
    w = wv.get_wavelet(wavelet_name)
    L = w.length
    a = np.asarray(x, dtype=np.float64)
    for _ in range(level - 1):
        a = _oracle_step(a, w.dec_lo, L)[0]
    ca = _oracle_step(a, w.dec_lo, L)
    cd = _oracle_step(a, w.dec_hi, L)
    return cd[0]


def _oracle_step(a, filt, L):
    pad = L - 1
    left = a[:pad][::-1]
    right = a[-pad:][::-1]
    xp = np.concatenate([left, a, right])
    full = np.zeros(len(xp) + L - 1)
    for i in range(len(xp)):          # explicit convolution, no library call
        for k in range(L):
            full[i + k] += xp[i] * filt[k]
    valid = full[L - 1 : len(xp)]
    return (valid[1::2],)


class TestPerfectReconstruction:
    @pytest.mark.parametrize("name", ["haar", "d4"])
    @pytest.mark.parametrize("n", [16, 61, 250])
    def test_reconstruction(self, name, n):
        rng = np.random.default_rng(n)
        x = rng.normal(size=n)
        dec = wv.wavedec(x, name, 3)
        assert np.allclose(wv.waverec(dec), x, atol=1e-10)

    def test_constant_details_vanish(self):
        dec = wv.wavedec(np.full(128, 4.2), "d4", 4)
        for d in dec.details:
            assert np.max(np.abs(d)) < 1e-12


class TestFilterBankOracle:
    def test_details_match_direct_convolution(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=200)
        dec = wv.wavedec(x, "d4", 3)
        for level in (1, 2, 3):
            want = oracle_dwt_level(x, "d4", level)
            assert np.max(np.abs(dec.details[level - 1] - want)) < 1e-12

    def test_detail_sumsq_matches_oracle(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=300)
        dec = wv.wavedec(x, "d4", 4)
        for level in (1, 2, 3, 4):
            d = oracle_dwt_level(x, "d4", level)
            want = float(np.sum((d - d.mean()) ** 2))
            assert wv.detail_sumsq(dec, level) == pytest.approx(want, abs=1e-9)


class TestGuards:
    def test_too_short_for_levels(self):
        with pytest.raises(ValueError):
            wv.wavedec(np.zeros(6), "d4", 3)

    def test_shorter_than_filter(self):
        with pytest.raises(ValueError):
            wv.wavedec(np.zeros(3), "d4", 1)

    def test_unknown_wavelet(self):
        with pytest.raises(ValueError):
            wv.get_wavelet("sym9")

    def test_feasible_levels(self):
        assert wv.max_feasible_levels(60) == 4
        assert wv.max_feasible_levels(3) == 0
        assert wv.max_feasible_levels(10 ** 9, cap=18) == 18
