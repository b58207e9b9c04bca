"""Per-frame ECG features: time-domain HRV statistics, Lomb-Scargle
spectral descriptors of the tachogram and the EDR, and wavelet
detail-band variances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from osadetect import wavelets
from osadetect.lomb import lomb_periodogram, significance
from osadetect.mi import estimate_mi
from osadetect.qrs import EDRSeries, RRTachogram
from osadetect.spo2_features import autocorr_lag

SEQ_LAGS = (1, 2, 3, 4)
ALLAN_SCALES_S = (1, 2, 5, 10)
LF_BAND = (0.04, 0.15)
HF_BAND = (0.15, 0.40)
GRID_SIZE = 64
WAVELET_LEVEL_RANGE = range(2, 18)   # emitted levels
WAVELET_HF_LEVELS = range(2, 5)
WAVELET_LF_LEVELS = range(5, 18)
MIN_INTERVALS = 5
NN_THRESHOLD_MS = 50.0


def default_grid(size=GRID_SIZE):
    return np.linspace(LF_BAND[0], HF_BAND[1], size)


@dataclass
class EcgTimeFeatures:
    mid_time_s: float
    m: int                      # interval count
    mean_rr_ms: float
    nn50_v1: int
    nn50_v2: int
    pnn50_v1: float
    pnn50_v2: float
    sdnn_ms: float
    sdsd_ms: float
    rmssd_ms: float
    r_k: dict
    mi_k: dict
    allan_k: dict
    nep: float
    edr_mean: float
    edr_std: float
    low_quality: bool = False


def allan_factor(event_times_s, duration_s, scale_s):
    """Allan factor of the counting process at one section length."""
    n_sections = int(duration_s // scale_s)
    if n_sections < 2:
        return 0.0
    t = np.asarray(event_times_s, dtype=np.float64)
    counts = np.histogram(t, bins=n_sections, range=(0.0, n_sections * scale_s))[0]
    diffs = np.diff(counts.astype(np.float64))
    denom = 2.0 * counts[1:].mean()
    if denom == 0:
        return 0.0
    return float(np.mean(diffs ** 2) / denom)


def ecg_time_features(t: RRTachogram, edr: EDRSeries, frame_seconds=60.0) -> EcgTimeFeatures:
    """Evaluate the time-domain feature formulas on one frame's tachogram."""
    rr = t.rr_ms
    m = len(rr)
    low_quality = m < MIN_INTERVALS

    if m == 0:
        zeros = {k: 0.0 for k in SEQ_LAGS}
        return EcgTimeFeatures(0.0, 0, 0.0, 0, 0, 0.0, 0.0, 0.0, 0.0, 0.0,
                               dict(zeros), dict(zeros),
                               {k: 0.0 for k in ALLAN_SCALES_S}, 0.0,
                               _mean(edr.values), _std(edr.values), True)

    rd = np.diff(rr)
    nn50_v1 = int(np.sum(-rd > NN_THRESHOLD_MS))   # rr_i - rr_{i+1} > 50 ms
    nn50_v2 = int(np.sum(rd > NN_THRESHOLD_MS))    # rr_{i+1} - rr_i > 50 ms
    sdnn = _std(rr)
    sdsd = math.sqrt(float(np.sum((rd - rd.mean()) ** 2)) / (m - 1)) if m >= 2 else 0.0
    rmssd = math.sqrt(float(np.mean(rd ** 2))) if m >= 2 else 0.0

    r_k, mi_k = {}, {}
    for k in SEQ_LAGS:
        r_k[k] = autocorr_lag(rr, k) if m > k else 0.0
        if m - k >= 10 and np.ptp(rr) > 0:
            mi_k[k] = estimate_mi(rr[:-k], rr[k:])
        else:
            mi_k[k] = 0.0

    if m >= 3:
        prod = rd[:-1] * rd[1:]
        nep = float(np.mean(prod < 0))  # 1 - U(prod), U(0) = 1
    else:
        nep = 0.0

    allan = {k: allan_factor(t.times_s, frame_seconds, k) for k in ALLAN_SCALES_S}

    return EcgTimeFeatures(
        mid_time_s=float(t.times_s.mean()),
        m=m,
        mean_rr_ms=float(rr.mean()),
        nn50_v1=nn50_v1,
        nn50_v2=nn50_v2,
        pnn50_v1=nn50_v1 / m,
        pnn50_v2=nn50_v2 / m,
        sdnn_ms=sdnn,
        sdsd_ms=sdsd,
        rmssd_ms=rmssd,
        r_k=r_k,
        mi_k=mi_k,
        allan_k=allan,
        nep=nep,
        edr_mean=_mean(edr.values),
        edr_std=_std(edr.values),
        low_quality=low_quality,
    )


def _mean(x):
    return float(np.mean(x)) if len(x) else 0.0


def _std(x):
    return float(np.std(x, ddof=1)) if len(x) > 1 else 0.0


# ---------------------------------------------------------------------------
# Spectral features
# ---------------------------------------------------------------------------

@dataclass
class SpectralFeatures:
    p_lf: float
    p_hf: float
    lf_hf_ratio: float
    grid_hz: np.ndarray
    grid_samples: np.ndarray
    omega_resp_hz: float
    resp_mag: float
    resp_prob: float
    omega_probmax_hz: float
    probmax: float
    probmax_mag: float


def band_power(freqs, power, lo, hi):
    """Trapezoidal band integral, interpolating the band edges."""
    freqs = np.asarray(freqs, dtype=np.float64)
    inside = (freqs > lo) & (freqs < hi)
    f = np.concatenate([[lo], freqs[inside], [hi]])
    p = np.concatenate([
        [np.interp(lo, freqs, power)], np.asarray(power)[inside], [np.interp(hi, freqs, power)]
    ])
    return float(np.trapezoid(p, f))


def spectral_features(times_s, values, grid_hz=None) -> SpectralFeatures:
    grid = default_grid() if grid_hz is None else np.asarray(grid_hz, dtype=np.float64)
    hf_mask = grid >= HF_BAND[0]
    x = np.asarray(values, dtype=np.float64)
    if len(x) < 4 or np.ptp(x) == 0:
        power = np.zeros(len(grid))
        sig = np.zeros(len(grid))
    else:
        power, fap = lomb_periodogram(times_s, x, grid)
        sig = 1.0 - fap

    p_lf = band_power(grid, power, *LF_BAND)
    p_hf = band_power(grid, power, *HF_BAND)
    ratio = p_lf / p_hf if p_hf > 0 else 0.0

    hf_idx = np.flatnonzero(hf_mask)
    i_resp = hf_idx[int(np.argmax(power[hf_idx]))]       # first max: low-frequency tie-break
    i_prob = int(np.argmax(sig))
    return SpectralFeatures(
        p_lf=p_lf,
        p_hf=p_hf,
        lf_hf_ratio=ratio,
        grid_hz=grid,
        grid_samples=power,
        omega_resp_hz=float(grid[i_resp]),
        resp_mag=float(power[i_resp]),
        resp_prob=float(sig[i_resp]),
        omega_probmax_hz=float(grid[i_prob]),
        probmax=float(sig[i_prob]),
        probmax_mag=float(power[i_prob]),
    )


def hrv_spectral_features(t: RRTachogram, grid_hz=None) -> SpectralFeatures:
    return spectral_features(t.times_s, t.rr_ms, grid_hz)


def edr_spectral_features(edr: EDRSeries, grid_hz=None) -> SpectralFeatures:
    return spectral_features(edr.times_s, edr.values, grid_hz)


# ---------------------------------------------------------------------------
# Wavelet detail variances
# ---------------------------------------------------------------------------

@dataclass
class WaveletVariances:
    sumsq: dict = field(default_factory=dict)  # level -> sum of squared deviations
    lf_aggregate: float = 0.0
    hf_aggregate: float = 0.0
    low_quality: bool = False

    def level(self, k):
        return self.sumsq.get(k, 0.0)


def dwt_detail_variances(series, max_levels=18, wavelet="d4") -> WaveletVariances:
    """Per-level detail-band sums of squared deviations.

    Decomposes to min(max_levels, floor(log2 n) - 1); absent levels
    contribute zero.  Series shorter than 4 points yield all zeros with
    the low-quality flag set.
    """
    x = np.asarray(series, dtype=np.float64)
    feasible = wavelets.max_feasible_levels(len(x), cap=max_levels)
    if feasible < 1:
        return WaveletVariances({k: 0.0 for k in range(1, max_levels + 1)}, 0.0, 0.0, True)
    dec = wavelets.wavedec(x, wavelet, feasible)
    sumsq = {k: wavelets.detail_sumsq(dec, k) for k in range(1, max_levels + 1)}
    lf = sum(sumsq.get(k, 0.0) for k in WAVELET_LF_LEVELS)
    hf = sum(sumsq.get(k, 0.0) for k in WAVELET_HF_LEVELS)
    return WaveletVariances(sumsq, lf, hf, False)
