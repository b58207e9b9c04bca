"""Synthetic two-channel record generation for end-to-end tests.

Apnoeic minutes carry the physiological signatures the pipeline looks
for: a slow bradycardia/tachycardia swing of the R-R intervals (CVHR),
suppressed respiratory amplitude modulation of the ECG, and a delayed
SpO2 desaturation dip.  Normal minutes show ordinary respiratory sinus
arrhythmia and a steady saturation around the baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from osadetect.records import ChannelSpec, EventAnnotation, SignalRecord


@dataclass(frozen=True)
class SynthParams:
    duration_s: float = 3600.0
    apnea_rate: float = 0.4          # fraction of minutes carrying one event
    event_duration_s: float = 25.0
    desat_depth_pct: float = 6.0
    desat_duration_s: float = 30.0
    cvhr_depth: float = 0.25         # fractional R-R swing during events
    noise_level: float = 0.03        # ECG noise std relative to R amplitude
    spo2_noise_pct: float = 0.2
    baseline_spo2: float = 97.0
    heart_rate_bpm: float = 70.0
    ecg_fs: float = 250.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.apnea_rate <= 1.0:
            raise ValueError("apnea_rate must be in [0, 1]")
        if not 10.0 <= self.event_duration_s <= 55.0:
            raise ValueError("event_duration_s must be in [10, 55]")
        if self.desat_depth_pct < 0 or self.desat_depth_pct > 40:
            raise ValueError("desat_depth_pct must be in [0, 40]")
        if self.duration_s < 360:
            raise ValueError("need at least 6 minutes for a usable record")


@dataclass
class _EventPlan:
    start_s: float
    duration_s: float


def _plan_events(params: SynthParams, rng) -> list[_EventPlan]:
    minutes = int(params.duration_s // 60)
    events = []
    for minute in range(minutes):
        if rng.random() >= params.apnea_rate:
            continue
        slack = 60.0 - params.event_duration_s
        offset = rng.uniform(0.1 * slack, 0.9 * slack) if slack > 0 else 0.0
        events.append(_EventPlan(minute * 60.0 + offset, params.event_duration_s))
    return events


def _in_event(t, events):
    for ev in events:
        if ev.start_s <= t < ev.start_s + ev.duration_s:
            return ev
    return None


def _beat_times(params: SynthParams, events, rng):
    base_rr = 60.0 / params.heart_rate_bpm
    times = [0.5]
    while times[-1] < params.duration_s - 1.0:
        t = times[-1]
        ev = _in_event(t, events)
        if ev is not None:
            phase = (t - ev.start_s) / ev.duration_s
            mod = params.cvhr_depth * np.sin(2.0 * np.pi * phase)
        else:
            mod = 0.03 * np.sin(2.0 * np.pi * 0.25 * t)  # respiratory sinus arrhythmia
        rr = base_rr * (1.0 + mod) * (1.0 + rng.normal(0.0, 0.01))
        times.append(t + max(rr, 0.3))
    return np.array(times)


def _ecg_from_beats(params: SynthParams, beat_times, events, rng):
    fs = params.ecg_fs
    n = int(round(params.duration_s * fs))
    t = np.arange(n) / fs
    ecg = np.zeros(n)
    span = int(round(0.45 * fs))
    for bt in beat_times:
        ev = _in_event(bt, events)
        resp_mod = 0.0 if ev is not None else 0.15 * np.sin(2.0 * np.pi * 0.25 * bt)
        amp = 1.0 + resp_mod
        c = int(round(bt * fs))
        lo, hi = max(c - span, 0), min(c + span, n)
        seg_t = t[lo:hi] - bt
        ecg[lo:hi] += amp * np.exp(-0.5 * (seg_t / 0.012) ** 2)
        ecg[lo:hi] -= 0.3 * amp * np.exp(-0.5 * ((seg_t - 0.030) / 0.014) ** 2)
        ecg[lo:hi] += 0.2 * amp * np.exp(-0.5 * ((seg_t - 0.250) / 0.060) ** 2)
    ecg += rng.normal(0.0, params.noise_level, n)
    ecg += 0.1 * np.sin(2.0 * np.pi * 0.3 * t)  # baseline wander for the denoiser to remove
    return ecg


def _spo2_from_events(params: SynthParams, events, rng):
    n = int(round(params.duration_s))
    t = np.arange(n, dtype=np.float64)
    spo2 = np.full(n, params.baseline_spo2)
    spo2 += rng.normal(0.0, params.spo2_noise_pct, n)
    for ev in events:
        # Desaturation trails the airflow pause; raised-cosine dip.
        dip_start = ev.start_s + 8.0
        dur = params.desat_duration_s
        phase = (t - dip_start) / dur
        mask = (phase >= 0) & (phase < 1)
        spo2[mask] -= params.desat_depth_pct * 0.5 * (1 - np.cos(2 * np.pi * phase[mask]))
    return np.clip(spo2, 40.0, 100.0)


def synth_generate(params: SynthParams = SynthParams()) -> SignalRecord:
    """Generate a labeled synthetic recording; identical output per seed."""
    rng = np.random.default_rng(params.seed)
    events = _plan_events(params, rng)
    beat_times = _beat_times(params, events, rng)
    ecg = _ecg_from_beats(params, beat_times, events, rng)
    spo2 = _spo2_from_events(params, events, rng)
    annotations = [EventAnnotation(ev.start_s, ev.duration_s, "apnea") for ev in events]
    return SignalRecord(
        record_id=f"synth-{params.seed}",
        ecg=ecg,
        ecg_spec=ChannelSpec("ecg", params.ecg_fs, "mV"),
        spo2=spo2,
        spo2_spec=ChannelSpec("spo2", 1.0, "%"),
        annotations=annotations,
    )
