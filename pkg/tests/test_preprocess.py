import numpy as np
import pytest

from osadetect.preprocess import (
    DenoiseConfig,
    downsample_ecg,
    reject_spo2_artifacts,
    spo2_artifact_mask,
    wavelet_denoise,
)
from osadetect.records import ChannelSpec, SignalRecord


def band_power(x, fs, lo, hi):
    """DFT band-power oracle."""
    spec = np.abs(np.fft.rfft(x)) ** 2
    f = np.fft.rfftfreq(len(x), 1.0 / fs)
    return spec[(f >= lo) & (f <= hi)].sum()


class TestDownsample:
    def test_factor_two_length(self):
        x = np.random.default_rng(0).normal(size=10001)
        y = downsample_ecg(x, 500, 250)
        assert len(y) == 10001 // 2

    def test_upsampling_refused(self):
        with pytest.raises(ValueError):
            downsample_ecg(np.zeros(1000), 128, 250)

    def test_non_integer_factor_refused(self):
        with pytest.raises(ValueError):
            downsample_ecg(np.zeros(1000), 360, 250)

    def test_sinusoid_dominant_bin_preserved(self):
        fs = 1000.0
        t = np.arange(int(8 * fs)) / fs
        x = np.sin(2 * np.pi * 10.0 * t)
        y = downsample_ecg(x, fs, 250)
        f = np.fft.rfftfreq(len(y), 1 / 250.0)
        peak = f[np.argmax(np.abs(np.fft.rfft(y)))]
        assert peak == pytest.approx(10.0, abs=f[1])

    def test_duration_preserved_within_one_sample(self):
        for n in (4000, 4001, 4003):
            y = downsample_ecg(np.zeros(n), 500, 125)
            assert abs(n / 500 - len(y) / 125) <= 1 / 125 + 1e-12


class TestWaveletDenoise:
    def test_zero_in_zero_out(self):
        out = wavelet_denoise(np.zeros(4096))
        assert np.array_equal(out, np.zeros(4096))

    def test_constant_offset_removed(self, ecg_train):
        ecg = ecg_train(np.arange(1, 15, 1.0), 250, 16)
        a = wavelet_denoise(ecg)
        b = wavelet_denoise(ecg + 500.0)
        assert np.allclose(a, b, atol=1e-6)

    def test_baseline_drift_attenuated_20db(self, ecg_train):
        fs = 250.0
        ecg = ecg_train(np.arange(1, 59, 1.0), fs, 60)
        t = np.arange(len(ecg)) / fs
        drift = 0.8 * np.sin(2 * np.pi * 0.3 * t)
        out = wavelet_denoise(ecg + drift)
        before = band_power(drift, fs, 0.0, 0.5)
        after = band_power(out, fs, 0.0, 0.5)
        assert 10 * np.log10(before / max(after, 1e-300)) >= 20.0

    def test_homogeneity_without_threshold(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=5000)
        cfg = DenoiseConfig(threshold_scale=0.0)
        a = wavelet_denoise(7.0 * x, cfg)
        b = 7.0 * wavelet_denoise(x, cfg)
        assert np.allclose(a, b, rtol=1e-9, atol=1e-12)

    def test_output_length_equals_input(self):
        for n in (200, 1001, 16000):
            assert len(wavelet_denoise(np.random.default_rng(n).normal(size=n))) == n

    def test_too_short_raises(self):
        with pytest.raises(ValueError):
            wavelet_denoise(np.zeros(16), DenoiseConfig(levels=7))


class TestSpO2Artifacts:
    def test_constant_clean(self):
        assert not spo2_artifact_mask(np.full(60, 97.0)).any()

    def test_low_value_masked(self):
        x = np.full(10, 97.0)
        x[4] = 45.0
        mask = spo2_artifact_mask(x)
        # the 45% sample plus both endpoints of the two >40% jumps
        assert mask[4]
        assert mask[3] and mask[5]

    def test_jump_masks_both_endpoints(self):
        mask = spo2_artifact_mask(np.array([96.0, 50.0, 96.0]))
        assert mask.tolist() == [True, True, True]

    def test_boundary_values_kept(self):
        # 50% is not below 50%; a jump of exactly 40% is not "more than 40%"
        mask = spo2_artifact_mask(np.array([90.0, 50.0, 90.0]))
        assert not mask.any()

    def test_idempotent(self):
        rng = np.random.default_rng(8)
        x = 96 + rng.normal(0, 1, 600)
        x[rng.integers(0, 600, 12)] = 43.0
        rec = SignalRecord("a", np.zeros(600 * 100), ChannelSpec("ecg", 100.0),
                           x, ChannelSpec("spo2", 1.0))
        once = reject_spo2_artifacts(rec)
        twice = reject_spo2_artifacts(once)
        assert np.array_equal(once.excluded_mask, twice.excluded_mask)
        # no retained sample violates either rule
        kept = once.spo2[~once.excluded_mask]
        assert (kept >= 50).all()
