"""Variance-normalized Lomb-Scargle periodogram for unevenly sampled series.

On a uniform time grid the normalized power reduces exactly to the
classical periodogram |DFT|^2 / (n * variance) at the Fourier
frequencies, which is the module's central numerical check.
"""

from __future__ import annotations

import numpy as np


def lomb_periodogram(times_s, values, grid_hz):
    """Normalized Lomb-Scargle power and false-alarm probability per frequency.

    Power follows the classical two-term least-squares form with the
    time-offset tau removing the sampling phase; normalization is by the
    sample variance after mean removal.  The false-alarm probability uses
    1 - (1 - exp(-z))**M with M the grid size.
    """
    t = np.asarray(times_s, dtype=np.float64)
    x = np.asarray(values, dtype=np.float64)
    f = np.asarray(grid_hz, dtype=np.float64)
    if len(t) != len(x):
        raise ValueError("times and values lengths differ")
    if len(t) < 4:
        raise ValueError(f"need at least 4 points, got {len(t)}")
    if np.any(f <= 0):
        raise ValueError("grid frequencies must be positive")

    var = float(np.var(x, ddof=1))
    if var == 0.0:
        return np.zeros(len(f)), np.zeros(len(f))
    xc = x - x.mean()

    omega = 2.0 * np.pi * f[:, None]  # (F, 1) against times (n,)
    wt = omega * t[None, :]
    tau = np.arctan2(np.sum(np.sin(2.0 * wt), axis=1), np.sum(np.cos(2.0 * wt), axis=1)) / (
        2.0 * omega[:, 0]
    )
    arg = wt - (omega[:, 0] * tau)[:, None]
    cos_a, sin_a = np.cos(arg), np.sin(arg)
    c_num = (xc[None, :] * cos_a).sum(axis=1) ** 2
    s_num = (xc[None, :] * sin_a).sum(axis=1) ** 2
    c_den = (cos_a ** 2).sum(axis=1)
    s_den = (sin_a ** 2).sum(axis=1)
    power = np.zeros(len(f))
    np.divide(c_num, c_den, out=power, where=c_den > 0)
    tmp = np.zeros(len(f))
    np.divide(s_num, s_den, out=tmp, where=s_den > 0)
    power = (power + tmp) / (2.0 * var)

    fap = false_alarm_probability(power, len(f))
    return power, fap


def false_alarm_probability(power, n_independent):
    """Classical multi-trial false-alarm probability 1 - (1 - e^-z)^M."""
    z = np.maximum(np.asarray(power, dtype=np.float64), 0.0)
    return 1.0 - (1.0 - np.exp(-z)) ** n_independent


def significance(power, n_independent):
    """Peak significance (1 - false-alarm probability)."""
    z = np.maximum(np.asarray(power, dtype=np.float64), 0.0)
    return (1.0 - np.exp(-z)) ** n_independent
