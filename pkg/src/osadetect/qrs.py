"""QRS detection, R-R tachogram construction, ectopic rejection, and EDR.

The detector follows the Hamilton-Tompkins recipe: bandpass, derivative,
rectification, moving-window integration, then adaptive dual thresholds
with a search-back pass.  All thresholds derive from the data itself, so
detection is invariant to amplitude scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

REFRACTORY_S = 0.200
TWAVE_WINDOW_S = 0.360
SEARCHBACK_FACTOR = 1.5
THRESHOLD_COEF = 0.3125  # position of the detection threshold between noise and signal peaks
S_SEARCH_S = 0.120

RR_TOLERANCE = 0.20  # fractional deviation from the last normal interval
RS_TOLERANCE = 0.30  # fractional deviation from the running R-S reference


@dataclass(frozen=True)
class Beat:
    r_time_s: float
    r_amp: float
    s_amp: float

    @property
    def rs_diff(self):
        return self.r_amp - self.s_amp


@dataclass
class RRTachogram:
    """Point series of R-R intervals, each stamped with its end-beat time.

    Constructed from a beat list the usual invariant rr_i = t_{i+1} - t_i
    holds; after ectopic rejection individual interval points may be
    missing, which is the representation the Lomb periodogram expects.
    """

    times_s: np.ndarray
    rr_ms: np.ndarray

    def __post_init__(self):
        self.times_s = np.asarray(self.times_s, dtype=np.float64)
        self.rr_ms = np.asarray(self.rr_ms, dtype=np.float64)
        if len(self.times_s) != len(self.rr_ms):
            raise ValueError("times and rr lengths differ")
        if len(self.times_s) > 1 and not np.all(np.diff(self.times_s) > 0):
            raise ValueError("tachogram times must be strictly increasing")
        if np.any(self.rr_ms <= 0):
            raise ValueError("all R-R intervals must be positive")

    def __len__(self):
        return len(self.rr_ms)

    @classmethod
    def from_beat_times(cls, times_s):
        times_s = np.asarray(times_s, dtype=np.float64)
        if len(times_s) < 2:
            return cls.empty()
        return cls(times_s[1:], np.diff(times_s) * 1000.0)

    @classmethod
    def from_beats(cls, beats):
        return cls.from_beat_times([b.r_time_s for b in beats])

    @classmethod
    def empty(cls):
        return cls(np.empty(0), np.empty(0))


@dataclass
class EDRSeries:
    times_s: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times_s = np.asarray(self.times_s, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.times_s) != len(self.values):
            raise ValueError("times and values lengths differ")

    def __len__(self):
        return len(self.values)

    @classmethod
    def empty(cls):
        return cls(np.empty(0), np.empty(0))


@dataclass
class QrsDetection:
    beats: list[Beat]
    low_quality_spans: list[tuple[float, float]] = field(default_factory=list)

    @property
    def low_quality(self):
        return bool(self.low_quality_spans)


def _integrated_envelope(ecg, fs):
    nyq = fs / 2.0
    b, a = sps.butter(3, [5.0 / nyq, min(15.0, nyq * 0.9) / nyq], btype="band")
    band = sps.filtfilt(b, a, ecg)
    deriv = np.gradient(band) * fs
    window = max(int(round(0.080 * fs)), 1)
    return np.convolve(np.abs(deriv), np.ones(window) / window, mode="same"), band


def _local_maxima(y):
    if len(y) < 3:
        return np.empty(0, dtype=int)
    return np.flatnonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])) + 1


def detect_qrs(ecg, fs) -> QrsDetection:
    """Detect QRS complexes; returns beats plus low-quality (beat-free) spans."""
    if fs < 100:
        raise ValueError(f"sampling rate {fs} Hz too low for QRS detection (need >= 100 Hz)")
    ecg = np.asarray(ecg, dtype=np.float64)
    duration = len(ecg) / fs
    if len(ecg) < int(fs):
        return QrsDetection([], [(0.0, duration)] if duration >= 10 else [])

    mwi, band = _integrated_envelope(ecg, fs)
    peaks = _local_maxima(mwi)
    peaks = peaks[mwi[peaks] > 0]

    refractory = int(round(REFRACTORY_S * fs))
    twave_win = int(round(TWAVE_WINDOW_S * fs))
    head = mwi[: int(2 * fs)]
    spki = float(head.max()) if len(head) else 0.0
    npki = float(head.mean()) / 2.0 if len(head) else 0.0

    accepted = []     # indices into mwi
    rejected = []     # (index, value) candidates since the last accepted beat
    rr_history = []

    def threshold():
        return npki + THRESHOLD_COEF * (spki - npki)

    for ip in peaks:
        pv = mwi[ip]
        if accepted and ip - accepted[-1] < refractory:
            continue
        is_qrs = pv > threshold()
        if is_qrs and accepted and ip - accepted[-1] < twave_win:
            # T-wave discrimination: markedly gentler slope than the last beat.
            cur = _max_slope(band, ip, fs)
            prev = _max_slope(band, accepted[-1], fs)
            if cur < 0.5 * prev:
                is_qrs = False
        if is_qrs:
            if accepted:
                rr_history.append(ip - accepted[-1])
                del rr_history[:-8]
            accepted.append(ip)
            rejected.clear()
            spki = 0.125 * pv + 0.875 * spki
        else:
            rejected.append((ip, pv))
            npki = 0.125 * pv + 0.875 * npki
        # Search-back: the expected beat is overdue, re-examine rejected peaks.
        if accepted and len(rr_history) >= 2:
            avg_rr = float(np.mean(rr_history))
            if ip - accepted[-1] > SEARCHBACK_FACTOR * avg_rr:
                cands = [
                    (jp, jv)
                    for jp, jv in rejected
                    if jp - accepted[-1] >= refractory and ip - jp >= refractory
                    and jv > 0.5 * threshold()
                ]
                if cands:
                    jp, jv = max(cands, key=lambda c: c[1])
                    accepted.append(jp)
                    accepted.sort()
                    rr_history.append(accepted[-1] - accepted[-2])
                    del rr_history[:-8]
                    rejected = [(kp, kv) for kp, kv in rejected if kp > jp]
                    spki = 0.25 * jv + 0.75 * spki

    beats = _refine_beats(ecg, fs, accepted)
    spans = _quiet_spans([b.r_time_s for b in beats], duration)
    return QrsDetection(beats, spans)


def _max_slope(band, ip, fs):
    half = int(round(0.050 * fs))
    seg = band[max(ip - half, 0) : ip + half + 1]
    if len(seg) < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(seg))))


def _refine_beats(ecg, fs, mwi_indices):
    """Locate R on the raw signal near each envelope peak; measure R and S."""
    half = int(round(0.060 * fs))
    s_win = int(round(S_SEARCH_S * fs))
    refractory = int(round(REFRACTORY_S * fs))
    beats = []
    last_idx = None
    for ip in sorted(mwi_indices):
        lo, hi = max(ip - half, 0), min(ip + half + 1, len(ecg))
        if hi <= lo:
            continue
        r_idx = lo + int(np.argmax(ecg[lo:hi]))
        if last_idx is not None and r_idx - last_idx < refractory:
            continue
        s_lo, s_hi = r_idx + 1, min(r_idx + s_win + 1, len(ecg))
        s_amp = float(np.min(ecg[s_lo:s_hi])) if s_hi > s_lo else float(ecg[r_idx])
        beats.append(Beat(r_idx / fs, float(ecg[r_idx]), s_amp))
        last_idx = r_idx
    return beats


def _quiet_spans(beat_times, duration, min_span=10.0):
    """Maximal beat-free spans of at least min_span seconds."""
    edges = [0.0] + sorted(beat_times) + [duration]
    spans = []
    for a, b in zip(edges, edges[1:]):
        if b - a >= min_span:
            spans.append((a, b))
    return spans


# ---------------------------------------------------------------------------
# Ectopic rejection
# ---------------------------------------------------------------------------

def screen_beats(beats) -> list[Beat]:
    """Drop beats with negative or >30%-deviant R-S amplitude difference.

    The reference is the median of the last eight accepted differences;
    the scan repeats until a pass removes nothing, so the result is a
    fixed point.
    """
    kept = list(beats)
    while True:
        diffs = [b.rs_diff for b in kept]
        out, accepted = [], []
        for b, d in zip(kept, diffs):
            if d <= 0:
                continue
            ref_pool = accepted[-8:] if accepted else [x for x in diffs[:8] if x > 0]
            ref = float(np.median(ref_pool)) if ref_pool else d
            if abs(d - ref) > RS_TOLERANCE * ref:
                continue
            accepted.append(d)
            out.append(b)
        if len(out) == len(kept):
            return out
        kept = out


def _rr_scan(times, rr):
    """One pass of the 20% rule; returns kept indices."""
    keep = []
    accepted_ref = None
    seed_pool = rr[: min(8, len(rr))]
    seed = float(np.median(seed_pool)) if len(seed_pool) else 0.0
    for i, v in enumerate(rr):
        ref = accepted_ref if accepted_ref is not None else seed
        if ref > 0 and abs(v - ref) > RR_TOLERANCE * ref:
            continue
        accepted_ref = v
        keep.append(i)
    return keep


def remove_ectopic(t: RRTachogram, beats, tol_s=1e-6) -> RRTachogram:
    """Clean a tachogram using the amplitude rules and the 20% R-R rule.

    Interval points are matched to beats by time, so the function accepts
    both a freshly built tachogram and an already-cleaned one with gaps.
    Intervals adjacent to a beat rejected by the amplitude screen are
    dropped; the remaining interval sequence is scanned against the last
    normal interval until stable.
    """
    beats = list(beats)
    if not beats or len(t) == 0:
        return RRTachogram.empty()

    beat_times = np.array([b.r_time_s for b in beats])
    order = np.argsort(beat_times)
    beat_times = beat_times[order]
    good_ids = {id(b) for b in screen_beats(beats)}
    good = np.array([id(beats[i]) in good_ids for i in order])

    def match(when):
        i = int(np.searchsorted(beat_times, when))
        for j in (i - 1, i):
            if 0 <= j < len(beat_times) and abs(beat_times[j] - when) <= tol_s:
                return j
        return -1

    times, rr = [], []
    for i in range(len(t)):
        end = match(t.times_s[i])
        start = match(t.times_s[i] - t.rr_ms[i] / 1000.0)
        if end < 0 or start < 0:
            raise ValueError("tachogram does not match the beat list")
        if good[start] and good[end]:
            times.append(t.times_s[i])
            rr.append(t.rr_ms[i])
    times, rr = np.asarray(times), np.asarray(rr)

    while True:
        keep = _rr_scan(times, rr)
        if len(keep) == len(rr):
            break
        times, rr = times[keep], rr[keep]
    return RRTachogram(times, rr)


# ---------------------------------------------------------------------------
# ECG-derived respiration
# ---------------------------------------------------------------------------

def extract_edr_qrs_area(ecg, fs, beats, half_window_s=0.050) -> EDRSeries:
    """Respiration surrogate: area under the rectified QRS around each R peak.

    The local baseline is the mean of the window endpoints; beats whose
    window runs off either end of the record are skipped.
    """
    ecg = np.asarray(ecg, dtype=np.float64)
    half = int(round(half_window_s * fs))
    times, values = [], []
    for b in beats:
        r = int(round(b.r_time_s * fs))
        i0, i1 = r - half, r + half
        if i0 < 0 or i1 >= len(ecg):
            continue
        seg = ecg[i0 : i1 + 1]
        baseline = 0.5 * (seg[0] + seg[-1])
        times.append(b.r_time_s)
        values.append(float(np.sum(np.abs(seg - baseline))) / fs)
    return EDRSeries(np.array(times), np.array(values))


def extract_edr_t_wave(ecg, fs, beats, search_s=(0.120, 0.400), level=0.5,
                       min_rel_amp=0.05) -> EDRSeries:
    """Respiration surrogate from T-wave duration at a fractional level.

    Duration is measured between the crossings of level*peak amplitude on
    both sides of the T peak inside the (R+120 ms, R+400 ms) window.
    Beats without a measurable T wave are skipped.
    """
    ecg = np.asarray(ecg, dtype=np.float64)
    i_lo = int(round(search_s[0] * fs))
    i_hi = int(round(search_s[1] * fs))
    times, values = [], []
    for b in beats:
        r = int(round(b.r_time_s * fs))
        a, z = r + i_lo, min(r + i_hi, len(ecg) - 1)
        if z - a < 4 or a < 0:
            continue
        seg = ecg[a : z + 1]
        base = 0.5 * (seg[0] + seg[-1])
        dev = seg - base
        pk = int(np.argmax(np.abs(dev)))
        amp = dev[pk]
        if abs(amp) < min_rel_amp * max(abs(b.r_amp), 1e-300):
            continue
        thr = level * amp
        sign = 1.0 if amp > 0 else -1.0
        below = sign * dev < sign * thr
        left = np.flatnonzero(below[:pk])
        right = np.flatnonzero(below[pk + 1 :])
        if len(left) == 0 or len(right) == 0:
            continue
        dur = ((pk + 1 + right[0]) - left[-1]) / fs
        times.append(b.r_time_s)
        values.append(dur)
    return EDRSeries(np.array(times), np.array(values))
