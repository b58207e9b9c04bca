import numpy as np
import pytest

from osadetect.lomb import lomb_periodogram
from osadetect.qrs import (
    Beat,
    RRTachogram,
    detect_qrs,
    extract_edr_qrs_area,
    extract_edr_t_wave,
    remove_ectopic,
    screen_beats,
)

FS = 250.0


class TestDetect:
    def test_regular_train_beat_times(self, ecg_train):
        truth = np.arange(1.0, 59.0, 1.0)
        det = detect_qrs(ecg_train(truth, FS, 60), FS)
        found = np.array([b.r_time_s for b in det.beats])
        assert len(found) == len(truth)
        assert np.all(np.abs(found - truth) < 0.02)
        rr = np.diff(found) * 1000
        assert np.all(np.abs(rr - 1000.0) <= 4.0)  # one 250 Hz sample
        assert not det.low_quality

    def test_flat_signal_low_quality(self):
        det = detect_qrs(np.zeros(int(60 * FS)), FS)
        assert det.beats == []
        assert det.low_quality_spans == [(0.0, 60.0)]

    def test_amplitude_scaling_invariance(self, ecg_train):
        ecg = ecg_train(np.arange(1.0, 59.0, 1.0), FS, 60)
        t1 = [b.r_time_s for b in detect_qrs(ecg, FS).beats]
        t2 = [b.r_time_s for b in detect_qrs(0.5 * ecg, FS).beats]
        t3 = [b.r_time_s for b in detect_qrs(8.0 * ecg, FS).beats]
        assert t1 == t2 == t3

    def test_constant_offset_invariance(self, ecg_train):
        ecg = ecg_train(np.arange(1.0, 29.0, 1.0), FS, 30)
        t1 = [b.r_time_s for b in detect_qrs(ecg, FS).beats]
        t2 = [b.r_time_s for b in detect_qrs(ecg + 300.0, FS).beats]
        assert t1 == t2

    def test_sensitivity_ppv_at_10db(self, ecg_train):
        truth = np.arange(1.0, 119.0, 0.85)
        clean = ecg_train(truth, FS, 120)
        rng = np.random.default_rng(4)
        noise = rng.normal(0, np.sqrt(np.mean(clean ** 2) / 10), len(clean))
        found = np.array([b.r_time_s for b in detect_qrs(clean + noise, FS).beats])
        hits = sum(1 for bt in truth if np.min(np.abs(found - bt)) < 0.05)
        false_pos = sum(1 for ft in found if np.min(np.abs(truth - ft)) > 0.05)
        assert hits / len(truth) >= 0.99
        assert (len(found) - false_pos) / len(found) >= 0.99

    def test_low_rate_rejected(self):
        with pytest.raises(ValueError):
            detect_qrs(np.zeros(1000), 50)

    def test_r_and_s_amplitudes(self, ecg_train):
        det = detect_qrs(ecg_train([2.0, 3.0, 4.0, 5.0, 6.0], FS, 8, r_amp=2.0), FS)
        for b in det.beats:
            assert b.r_amp == pytest.approx(2.0, rel=0.1)
            assert b.s_amp < 0  # the S dip goes below baseline
            assert b.rs_diff > b.r_amp


def beats_with(rr_ms, rs=None):
    times = np.concatenate([[0.0], np.cumsum(rr_ms) / 1000.0])
    rs = rs if rs is not None else [1.3] * len(times)
    return [Beat(t, 1.0, 1.0 - d) for t, d in zip(times, rs)]


class TestRemoveEctopic:
    def test_spec_example_20pct(self):
        beats = beats_with([800, 800, 1200, 800])
        t = RRTachogram.from_beats(beats)
        out = remove_ectopic(t, beats)
        assert np.allclose(out.rr_ms, [800, 800, 800])
        assert len(out) == 3

    def test_constant_fixed_point(self):
        beats = beats_with([820] * 40)
        t = RRTachogram.from_beats(beats)
        out = remove_ectopic(t, beats)
        assert np.array_equal(out.rr_ms, t.rr_ms)
        assert np.array_equal(out.times_s, t.times_s)

    def test_negative_rs_rejected(self):
        beats = beats_with([800] * 6, rs=[1.3, 1.3, 1.3, -0.2, 1.3, 1.3, 1.3])
        kept = screen_beats(beats)
        assert len(kept) == len(beats) - 1

    def test_rs_deviation_rejected(self):
        beats = beats_with([800] * 8, rs=[1.0] * 4 + [2.0] + [1.0] * 4)
        kept = screen_beats(beats)
        assert len(kept) == len(beats) - 1

    def test_idempotent(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            rr = rng.uniform(500, 1400, 60)
            rs = rng.uniform(0.5, 2.0, 61)
            beats = beats_with(rr, rs)
            t = RRTachogram.from_beats(beats)
            once = remove_ectopic(t, beats)
            again = remove_ectopic(once, _beats_of(once))
            assert np.array_equal(once.rr_ms, again.rr_ms)
            assert len(once) <= len(t)

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(11)
        for trial in range(30):
            rr = rng.uniform(600, 1200, 50)
            rr[rng.integers(0, 50, 5)] *= rng.uniform(1.4, 2.0, 5)
            rs = rng.uniform(0.9, 1.1, 51)
            rs[rng.integers(0, 51, 3)] = rng.choice([-0.5, 3.0], 3)
            beats = beats_with(rr, rs)
            t = RRTachogram.from_beats(beats)
            got = remove_ectopic(t, beats)
            want_times, want_rr = oracle_clean(np.array([b.r_time_s for b in beats]),
                                               np.array([b.rs_diff for b in beats]))
            assert np.allclose(got.times_s, want_times)
            assert np.allclose(got.rr_ms, want_rr)

    def test_all_rejected_gives_empty(self):
        beats = beats_with([800] * 5, rs=[-1.0] * 6)
        t = RRTachogram.from_beats(beats)
        out = remove_ectopic(t, beats)
        assert len(out) == 0


def _beats_of(t):
    """Reconstruct a beat list consistent with a cleaned point tachogram."""
    starts = t.times_s - t.rr_ms / 1000.0
    times = sorted(set(np.round(np.concatenate([starts, t.times_s]), 12)))
    return [Beat(x, 1.0, -0.3) for x in times]


def oracle_clean(beat_times, rs_diffs):
    """Straightforward re-implementation of the three ectopic rules."""
    # rule 2+3: amplitude screen to fixed point, median of last 8 accepted
    kept = list(range(len(beat_times)))
    while True:
        out, acc = [], []
        diffs = [rs_diffs[i] for i in kept]
        for pos, i in enumerate(kept):
            d = rs_diffs[i]
            if d <= 0:
                continue
            pool = acc[-8:] if acc else [x for x in diffs[:8] if x > 0]
            ref = float(np.median(pool)) if pool else d
            if abs(d - ref) > 0.3 * ref:
                continue
            acc.append(d)
            out.append(i)
        if len(out) == len(kept):
            break
        kept = out
    good = set(kept)
    pts = [
        (beat_times[i + 1], (beat_times[i + 1] - beat_times[i]) * 1000.0)
        for i in range(len(beat_times) - 1)
        if i in good and i + 1 in good
    ]
    # rule 1: 20% scan to fixed point, seeded by median of first 8
    while True:
        keep, ref = [], None
        seed_pool = [rr for _, rr in pts[:8]]
        seed = float(np.median(seed_pool)) if seed_pool else 0.0
        for j, (tt, rr) in enumerate(pts):
            r = ref if ref is not None else seed
            if r > 0 and abs(rr - r) > 0.2 * r:
                continue
            ref = rr
            keep.append(j)
        if len(keep) == len(pts):
            break
        pts = [pts[j] for j in keep]
    return np.array([t for t, _ in pts]), np.array([rr for _, rr in pts])


class TestEDR:
    def test_identical_beats_constant_series(self, ecg_train):
        truth = np.arange(1.0, 29.0, 1.0)
        ecg = ecg_train(truth, FS, 30)
        beats = detect_qrs(ecg, FS).beats
        edr = extract_edr_qrs_area(ecg, FS, beats)
        assert len(edr) == len(beats)
        assert np.std(edr.values) / np.mean(edr.values) < 0.01

    def test_amplitude_modulation_recovered(self, ecg_train):
        fs = FS
        truth = np.arange(1.0, 119.0, 1.0)
        n = int(120 * fs)
        t = np.arange(n) / fs
        ecg = np.zeros(n)
        for bt in truth:
            amp = 1.0 + 0.3 * np.sin(2 * np.pi * 0.3 * bt)
            ecg += amp * np.exp(-0.5 * ((t - bt) / 0.012) ** 2)
        beats = detect_qrs(ecg, fs).beats
        edr = extract_edr_qrs_area(ecg, fs, beats)
        grid = np.linspace(0.04, 0.45, 128)
        power, _ = lomb_periodogram(edr.times_s, edr.values, grid)
        assert grid[np.argmax(power)] == pytest.approx(0.3, abs=0.02)

    def test_empty_beats(self):
        edr = extract_edr_qrs_area(np.zeros(1000), FS, [])
        assert len(edr) == 0

    def test_window_out_of_bounds_skipped(self, ecg_train):
        ecg = ecg_train([0.01, 1.0], FS, 2)
        beats = [Beat(0.01, 1.0, 0.0), Beat(1.0, 1.0, 0.0)]
        edr = extract_edr_qrs_area(ecg, FS, beats)
        assert len(edr) == 1

    def test_t_wave_constant_width(self, ecg_train):
        truth = np.arange(1.0, 29.0, 1.0)
        ecg = ecg_train(truth, FS, 30, t_amp=0.3)
        beats = detect_qrs(ecg, FS).beats
        edr = extract_edr_t_wave(ecg, FS, beats)
        assert len(edr) >= len(beats) - 1
        assert np.std(edr.values) / np.mean(edr.values) < 0.05

    def test_t_wave_modulation_recovered(self):
        fs = FS
        truth = np.arange(1.0, 119.0, 1.0)
        n = int(120 * fs)
        t = np.arange(n) / fs
        ecg = np.zeros(n)
        for bt in truth:
            width = 0.05 * (1.0 + 0.4 * np.sin(2 * np.pi * 0.25 * bt))
            ecg += np.exp(-0.5 * ((t - bt) / 0.012) ** 2)
            ecg += 0.3 * np.exp(-0.5 * ((t - bt - 0.25) / width) ** 2)
        beats = detect_qrs(ecg, fs).beats
        edr = extract_edr_t_wave(ecg, fs, beats)
        grid = np.linspace(0.04, 0.45, 128)
        power, _ = lomb_periodogram(edr.times_s, edr.values, grid)
        assert grid[np.argmax(power)] == pytest.approx(0.25, abs=0.02)

    def test_no_t_wave_empty(self, ecg_train):
        truth = np.arange(1.0, 19.0, 1.0)
        ecg = ecg_train(truth, FS, 20, t_amp=0.0)
        beats = detect_qrs(ecg, FS).beats
        edr = extract_edr_t_wave(ecg, FS, beats)
        assert len(edr) == 0


class TestTachogram:
    def test_from_beats_invariant(self):
        beats = beats_with([700, 900, 800])
        t = RRTachogram.from_beats(beats)
        assert len(t.rr_ms) == len(beats) - 1
        assert np.allclose(t.rr_ms, [700, 900, 800])

    def test_nonpositive_rr_rejected(self):
        with pytest.raises(ValueError):
            RRTachogram(np.array([1.0, 2.0]), np.array([800.0, -5.0]))

    def test_nonincreasing_times_rejected(self):
        with pytest.raises(ValueError):
            RRTachogram(np.array([2.0, 1.0]), np.array([800.0, 800.0]))
