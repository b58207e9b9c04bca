"""ECG down-sampling, wavelet de-trending/denoising, SpO2 artifact rejection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from osadetect import wavelets
from osadetect.records import SignalRecord

SPO2_FLOOR_PCT = 50.0
SPO2_MAX_JUMP_PCT = 40.0


@dataclass(frozen=True)
class DenoiseConfig:
    wavelet: str = "d4"
    levels: int = 7
    detrend: bool = True
    threshold_scale: float = 1.0  # 0 disables soft-thresholding

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.threshold_scale < 0:
            raise ValueError("threshold_scale must be >= 0")


def downsample_ecg(ecg, fs, target_fs):
    """Anti-alias filter and decimate by the integer factor fs/target_fs.

    Non-integer factors (including any up-sampling request) are refused:
    keep the native rate instead of resampling across databases.
    """
    ecg = np.asarray(ecg, dtype=np.float64)
    if fs <= 0 or target_fs <= 0:
        raise ValueError("sampling rates must be positive")
    factor = fs / target_fs
    q = int(round(factor))
    if q < 1 or abs(factor - q) > 1e-9:
        raise ValueError(
            f"decimation factor {fs}/{target_fs} = {factor:.4f} is not a positive integer; "
            "keep the native rate for this record"
        )
    if q == 1:
        return ecg.copy()

    ntaps = 30 * q + 1
    # filtfilt needs > 3*ntaps samples; shrink the filter for short inputs.
    max_taps = (len(ecg) - 1) // 3
    if max_taps < 7:
        raise ValueError(f"signal of {len(ecg)} samples too short to decimate by {q}")
    ntaps = min(ntaps, max_taps if max_taps % 2 else max_taps - 1)
    taps = sps.firwin(ntaps, 0.8 / q)
    filtered = sps.filtfilt(taps, [1.0], ecg)
    out = filtered[::q]
    return out[: len(ecg) // q]


def wavelet_denoise(signal, cfg: DenoiseConfig = DenoiseConfig()):
    """Remove baseline wander and high-frequency noise.

    Decomposes with the configured wavelet, zeroes the deepest
    approximation band (detrend), and soft-thresholds the finest detail
    band at the universal threshold sigma*sqrt(2 ln n), sigma estimated
    from the median absolute deviation of that band.
    """
    x = np.asarray(signal, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("signal contains non-finite samples")
    dec = wavelets.wavedec(x, cfg.wavelet, cfg.levels)

    if cfg.detrend:
        dec.approx = np.zeros_like(dec.approx)
    if cfg.threshold_scale > 0:
        d1 = dec.details[0]
        sigma = np.median(np.abs(d1)) / 0.6745
        thr = cfg.threshold_scale * sigma * math.sqrt(2.0 * math.log(max(len(x), 2)))
        dec.details[0] = np.sign(d1) * np.maximum(np.abs(d1) - thr, 0.0)
    return wavelets.waverec(dec)


def spo2_artifact_mask(spo2):
    """Boolean mask of artifact seconds: SpO2 < 50% or a >40% jump.

    Both endpoints of a jump are marked; the floor rule marks its own
    sample only.
    """
    x = np.asarray(spo2, dtype=np.float64)
    mask = x < SPO2_FLOOR_PCT
    if len(x) > 1:
        jump = np.abs(np.diff(x)) > SPO2_MAX_JUMP_PCT
        mask[:-1] |= jump
        mask[1:] |= jump
    return mask


def reject_spo2_artifacts(record: SignalRecord) -> SignalRecord:
    """Return the record with its exclusion mask extended by the SpO2 rules."""
    mask = spo2_artifact_mask(record.spo2)
    return record.with_mask(record.excluded_mask | mask)
