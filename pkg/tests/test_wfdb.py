import numpy as np
import pytest

from osadetect.records import MissingChannelError
from osadetect.wfdb_io import UnsupportedFormatError, load_wfdb, write_wfdb


def _write_pair(tmp_path, fmt, n_seconds=360, fs=100):
    rng = np.random.default_rng(9)
    n = n_seconds * fs
    ecg_adc = rng.integers(-1500, 1500, n)
    spo2_adc = rng.integers(180, 200, n)  # ~90-100% at gain 2
    base = str(tmp_path / "rec")
    write_wfdb(base, [ecg_adc, spo2_adc], fs, fmt=fmt,
               gains=[200.0, 2.0], baselines=[0, 0], units=["mV", "%"],
               descriptions=["ECG", "SpO2"])
    return base, ecg_adc, spo2_adc


class TestFormat16:
    def test_round_trip_exact(self, tmp_path):
        base, ecg_adc, spo2_adc = _write_pair(tmp_path, 16)
        rec = load_wfdb(base)
        assert np.array_equal(rec.ecg, ecg_adc / 200.0)
        # SpO2 written at 100 Hz is averaged to 1 Hz
        want = (spo2_adc / 2.0).reshape(-1, 100).mean(axis=1)
        assert np.allclose(rec.spo2, want)
        assert rec.spo2_spec.sampling_rate_hz == 1.0


class TestFormat212:
    def test_round_trip_exact(self, tmp_path):
        base, ecg_adc, spo2_adc = _write_pair(tmp_path, 212)
        rec = load_wfdb(base)
        assert np.array_equal(rec.ecg, ecg_adc / 200.0)

    def test_hand_packed_bytes(self, tmp_path):
        # samples 100 and -5: 100 -> 0x064, -5 -> 0xFFB (two's complement)
        raw = bytes([0x64, 0xF0, 0xFB])
        (tmp_path / "h.dat").write_bytes(raw)
        (tmp_path / "h.hea").write_text(
            "h 2 1 1\nh.dat 212 1(0)/mV 12 0 0 0 0 ECG\nh.dat 212 1(0)/% 12 0 0 0 0 SpO2\n"
        )
        rec = load_wfdb(str(tmp_path / "h"))
        assert rec.ecg[0] == 100.0
        assert rec.spo2[0] == -5.0


class TestErrors:
    def test_unsupported_format(self, tmp_path):
        (tmp_path / "u.hea").write_text("u 1 100 10\nu.dat 80 200/mV 12 0 0 0 0 ECG\n")
        with pytest.raises(UnsupportedFormatError):
            load_wfdb(str(tmp_path / "u"))

    def test_format_modifier_rejected(self, tmp_path):
        (tmp_path / "m.hea").write_text("m 1 100 10\nm.dat 212x4 200/mV 12 0 0 0 0 ECG\n")
        with pytest.raises(UnsupportedFormatError):
            load_wfdb(str(tmp_path / "m"))

    def test_missing_spo2_channel(self, tmp_path):
        n = 360 * 100
        adc = np.zeros(n, dtype=int)
        base = str(tmp_path / "solo")
        write_wfdb(base, [adc], 100, fmt=16, descriptions=["ECG"])
        with pytest.raises(MissingChannelError):
            load_wfdb(base)

    def test_writer_range_check(self, tmp_path):
        with pytest.raises(ValueError):
            write_wfdb(str(tmp_path / "big"), [np.array([5000])], 1, fmt=212)
