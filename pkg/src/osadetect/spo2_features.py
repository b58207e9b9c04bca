"""Per-frame SpO2 feature bank.

All features operate on one 60-sample (1 Hz) frame except the recording
baseline, which is the mode of the retained SpO2 of the whole night.
Desaturation events are segmented as maximal runs at least 2% below the
baseline and classified by their maximum depth, so event counts are
monotone in the depth threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from osadetect.mi import estimate_mi
from osadetect.records import SignalRecord

SEQ_LAGS = (1, 2, 3, 4)
CTM_RADII = (0.25, 0.5, 0.75, 1.0)
ODI_DEPTHS = (2, 3, 4)
ODI_XY_DEPTHS = (2, 3, 5)
ODI_XY_DURATIONS = (1, 3, 5)
ODIS_DEPTHS = (4, 5)
TSA_LEVELS = (70, 80, 85, 90, 95)
EVENT_SEGMENT_DEPTH = 2.0  # shallowest depth appearing in any count grid


@dataclass(frozen=True)
class SpO2BasicStats:
    minimum: float
    mean: float
    std: float
    mean_crossings: int
    slope: float
    intercept: float


def spo2_basic_stats(frame) -> SpO2BasicStats:
    """Min/mean/std, mean-crossing count, and the least-squares line fit."""
    x = np.asarray(frame, dtype=np.float64)
    if len(x) < 2:
        raise ValueError("need at least 2 samples")
    mean = float(x.mean())
    std = float(x.std(ddof=1))
    dev = x - mean
    crossings = int(np.sum(dev[:-1] * dev[1:] < 0))
    t = np.arange(len(x), dtype=np.float64)
    slope, intercept = _line_fit(t, x)
    return SpO2BasicStats(float(x.min()), mean, std, crossings, abs(slope), intercept)


def _line_fit(t, x):
    tc = t - t.mean()
    denom = float(np.sum(tc * tc))
    if denom == 0:
        return 0.0, float(x.mean())
    slope = float(np.sum(tc * (x - x.mean())) / denom)
    return slope, float(x.mean() - slope * t.mean())


def autocorr_lag(x, k):
    """Lag-k autocorrelation, zero by convention on zero-variance input."""
    x = np.asarray(x, dtype=np.float64)
    if k >= len(x):
        raise ValueError(f"lag {k} too large for {len(x)} samples")
    dev = x - x.mean()
    denom = float(np.sum(dev * dev))
    if denom == 0:
        return 0.0
    return float(np.sum(dev[:-k] * dev[k:]) / denom)


def spo2_sequential_deps(frame, lags=SEQ_LAGS):
    """Lag-k autocorrelations and mutual informations, k in ``lags``."""
    x = np.asarray(frame, dtype=np.float64)
    if len(x) <= max(lags):
        raise ValueError("frame shorter than the largest lag")
    r = {}
    mi_k = {}
    degenerate = np.ptp(x) == 0
    for k in lags:
        r[k] = 0.0 if degenerate else autocorr_lag(x, k)
        mi_k[k] = 0.0 if degenerate else estimate_mi(x[:-k], x[k:])
    return r, mi_k


# ---------------------------------------------------------------------------
# Complexity measures
# ---------------------------------------------------------------------------

def approximate_entropy(x, m=1, r_factor=0.25):
    """ApEn(m, r) with tolerance r = r_factor * SD of the frame."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    sd = x.std(ddof=1)
    if sd == 0 or n < m + 2:
        return 0.0
    r = r_factor * sd

    def phi(mm):
        templ = np.lib.stride_tricks.sliding_window_view(x, mm)
        dist = np.max(np.abs(templ[:, None, :] - templ[None, :, :]), axis=2)
        c = np.mean(dist <= r, axis=1)
        return np.mean(np.log(c))

    return float(phi(m) - phi(m + 1))


def sample_entropy(x, m=1, r_factor=0.25):
    """SampEn(m, r): -ln(A/B) over template matches excluding self-matches."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    sd = x.std(ddof=1)
    if sd == 0 or n < m + 2:
        return 0.0
    r = r_factor * sd

    def matches(mm):
        templ = np.lib.stride_tricks.sliding_window_view(x, mm)
        dist = np.max(np.abs(templ[:, None, :] - templ[None, :, :]), axis=2)
        hit = dist <= r
        np.fill_diagonal(hit, False)
        return hit.sum()

    b = matches(m)
    a = matches(m + 1)
    if b == 0 or a == 0:
        return 0.0
    return float(-math.log(a / b))


def lz76_phrase_count(bits):
    """Number of LZ76 production phrases (Kaspar-Schuster counting)."""
    s = bytes(bits)
    n = len(s)
    if n == 0:
        return 0
    c, l = 1, 1
    i, k, kmax = 0, 1, 1
    while l + k <= n:
        if s[i + k - 1] == s[l + k - 1]:
            k += 1
        else:
            kmax = max(kmax, k)
            i += 1
            if i == l:
                c += 1
                l += kmax
                i, k, kmax = 0, 1, 1
            else:
                k = 1
    if k > 1:
        c += 1
    return c


def lempel_ziv_complexity(x):
    """LZ76 phrase count of the median-binarized frame, normalized by n/log2(n)."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n < 2:
        return 0.0
    bits = (x >= np.median(x)).astype(np.uint8)
    return lz76_phrase_count(bits) * math.log2(n) / n


def central_tendency(x, radius):
    """Fraction of consecutive-difference pairs inside the given radius."""
    x = np.asarray(x, dtype=np.float64)
    d = np.diff(x)
    if len(d) < 2:
        return 1.0
    pts = np.hypot(d[:-1], d[1:])
    return float(np.mean(pts < radius))


def delta_measure(x):
    """Mean absolute consecutive difference over the frame."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 2:
        return 0.0
    return float(np.mean(np.abs(np.diff(x))))


def spo2_complexity(frame, ctm_radii=CTM_RADII):
    x = np.asarray(frame, dtype=np.float64)
    if len(x) < 10:
        raise ValueError("need at least 10 samples")
    apen = approximate_entropy(x)
    sampen = sample_entropy(x)
    lzc = lempel_ziv_complexity(x)
    ctm = {r: central_tendency(x, r) for r in ctm_radii}
    return apen, sampen, lzc, ctm, delta_measure(x)


# ---------------------------------------------------------------------------
# Baseline and desaturation counts
# ---------------------------------------------------------------------------

def compute_baseline(record: SignalRecord, min_minutes=5) -> float:
    """Recording SpO2 baseline: mode of the retained samples rounded to 1%."""
    retained = record.spo2[~record.excluded_mask]
    if len(retained) < min_minutes * 60:
        raise ValueError(
            f"need at least {min_minutes} minutes of retained SpO2, have {len(retained)} s"
        )
    values = np.round(retained).astype(np.int64)
    values = values[values >= 0]
    counts = np.bincount(values)
    return float(np.argmax(counts))


def desaturation_events(frame, baseline, segment_depth=EVENT_SEGMENT_DEPTH):
    """Maximal runs at least ``segment_depth`` below baseline: (depth, duration_s)."""
    x = np.asarray(frame, dtype=np.float64)
    below = x <= baseline - segment_depth
    events = []
    i = 0
    while i < len(x):
        if below[i]:
            j = i
            while j + 1 < len(x) and below[j + 1]:
                j += 1
            events.append((float(baseline - x[i : j + 1].min()), j - i + 1))
            i = j + 1
        else:
            i += 1
    return events


@dataclass(frozen=True)
class DesaturationCounts:
    odi: dict          # depth -> run count
    odi_xy: dict       # (depth, duration) -> count
    odis: dict         # depth -> count (any duration)
    tsa: dict          # level -> fraction of frame below level


def spo2_desaturation(frame, baseline) -> DesaturationCounts:
    x = np.asarray(frame, dtype=np.float64)
    events = desaturation_events(x, baseline)
    odi = {d: sum(1 for depth, _ in events if depth >= d) for d in ODI_DEPTHS}
    odi_xy = {
        (d, y): sum(1 for depth, dur in events if depth >= d and dur >= y)
        for d in ODI_XY_DEPTHS
        for y in ODI_XY_DURATIONS
    }
    odis = {d: sum(1 for depth, _ in events if depth >= d) for d in ODIS_DEPTHS}
    tsa = {lvl: float(np.mean(x < lvl)) for lvl in TSA_LEVELS}
    return DesaturationCounts(odi, odi_xy, odis, tsa)
