"""Decimated discrete wavelet transform with symmetric boundary extension.

Implements the pyramid algorithm for orthogonal Daubechies filters.  The
4-tap Daubechies wavelet ("d4") is the workhorse for both ECG denoising
and the per-level detail-variance features; "haar" is kept for testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_SQRT3 = math.sqrt(3.0)
_SQRT2 = math.sqrt(2.0)

# Scaling (lowpass reconstruction) coefficients, sum = sqrt(2).
_SCALING = {
    "haar": np.array([1.0, 1.0]) / _SQRT2,
    "d4": np.array([1.0 + _SQRT3, 3.0 + _SQRT3, 3.0 - _SQRT3, 1.0 - _SQRT3]) / (4.0 * _SQRT2),
}


@dataclass(frozen=True)
class Wavelet:
    name: str
    dec_lo: np.ndarray
    dec_hi: np.ndarray
    rec_lo: np.ndarray
    rec_hi: np.ndarray

    @property
    def length(self):
        return len(self.dec_lo)


def get_wavelet(name) -> Wavelet:
    try:
        h = _SCALING[name]
    except KeyError:
        raise ValueError(f"unknown wavelet {name!r}; available: {sorted(_SCALING)}") from None
    # Orthogonal quadrature-mirror relations.
    rec_lo = h
    rec_hi = np.array([(-1.0) ** k * h[len(h) - 1 - k] for k in range(len(h))])
    return Wavelet(name, dec_lo=rec_lo[::-1].copy(), dec_hi=rec_hi[::-1].copy(),
                   rec_lo=rec_lo.copy(), rec_hi=rec_hi.copy())


def _pad_symmetric(x, pad):
    if len(x) < pad:
        # Repeatedly reflect very short signals until the pad is covered.
        while len(x) < pad + 1:
            x = np.concatenate([x, x[::-1]])
    return np.concatenate([x[:pad][::-1], x, x[-pad:][::-1]])


def dwt_single(x, wavelet: Wavelet):
    """One analysis step: returns (approx, detail), each of length floor((n+L-1)/2)."""
    L = wavelet.length
    xp = _pad_symmetric(np.asarray(x, dtype=np.float64), L - 1)
    ca = np.convolve(xp, wavelet.dec_lo, mode="valid")[1::2]
    cd = np.convolve(xp, wavelet.dec_hi, mode="valid")[1::2]
    return ca, cd


def idwt_single(ca, cd, wavelet: Wavelet, out_len):
    """Inverse of :func:`dwt_single` for coefficients of one level."""
    L = wavelet.length
    up_a = np.zeros(2 * len(ca))
    up_a[1::2] = ca
    up_d = np.zeros(2 * len(cd))
    up_d[1::2] = cd
    y = np.convolve(up_a, wavelet.rec_lo) + np.convolve(up_d, wavelet.rec_hi)
    start = L - 1
    if start + out_len > len(y):
        raise ValueError("coefficient arrays too short for requested output length")
    return y[start : start + out_len]


@dataclass
class Decomposition:
    """Pyramid coefficients: details[k] is level k+1 (finest first)."""

    approx: np.ndarray
    details: list[np.ndarray]
    lengths: list[int]  # input length at each level, lengths[0] = original n
    wavelet: Wavelet

    @property
    def levels(self):
        return len(self.details)


def wavedec(x, wavelet_name="d4", levels=1) -> Decomposition:
    x = np.asarray(x, dtype=np.float64)
    w = get_wavelet(wavelet_name)
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if len(x) < w.length:
        raise ValueError(f"signal of {len(x)} samples shorter than filter support {w.length}")
    if len(x) < 2 ** levels:
        raise ValueError(f"signal of {len(x)} samples too short for {levels} levels")
    details, lengths = [], []
    a = x
    for _ in range(levels):
        lengths.append(len(a))
        a, d = dwt_single(a, w)
        details.append(d)
    return Decomposition(approx=a, details=details, lengths=lengths, wavelet=w)


def waverec(dec: Decomposition) -> np.ndarray:
    a = dec.approx
    for level in range(dec.levels, 0, -1):
        a = idwt_single(a, dec.details[level - 1], dec.wavelet, dec.lengths[level - 1])
    return a


def max_feasible_levels(n, cap=18):
    """Deepest decomposition used for detail-variance features: floor(log2 n) - 1."""
    if n < 4:
        return 0
    return max(0, min(cap, int(math.floor(math.log2(n))) - 1))


def detail_sumsq(dec: Decomposition, level):
    """Sum of squared deviations of one detail band (zero when level absent)."""
    if level < 1 or level > dec.levels:
        return 0.0
    d = dec.details[level - 1]
    if len(d) == 0:
        return 0.0
    return float(np.sum((d - d.mean()) ** 2))
