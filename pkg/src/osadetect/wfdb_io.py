"""Minimal WFDB header/signal reader for storage formats 16 and 212.

Covers the public multi-signal recordings used for evaluation; anything
beyond formats 16 and 212 (multi-segment records, sample-skew modifiers)
raises :class:`UnsupportedFormatError`.  SpO2 channels sampled above 1 Hz
are reduced to 1 Hz by per-second averaging.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass

import numpy as np

from osadetect.records import ChannelSpec, FormatError, MissingChannelError, SignalRecord

SUPPORTED_FORMATS = (16, 212)

_SPO2_PATTERNS = ("spo2", "sao2", "osat", "sat")


class UnsupportedFormatError(FormatError):
    """WFDB storage format outside the supported subset (16, 212)."""


@dataclass
class _SignalSpec:
    file_name: str
    fmt: int
    gain: float
    baseline: int
    units: str
    adc_zero: int
    description: str


def _parse_header(hea_path):
    with open(hea_path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise FormatError(f"empty WFDB header {hea_path}")
    head = lines[0].split()
    if len(head) < 4:
        raise FormatError(f"bad WFDB record line {lines[0]!r}")
    record_name = head[0].split("/")[0]
    nsig = int(head[1])
    fs = float(head[2].split("/")[0])
    nsamp = int(head[3])
    if nsig < 1:
        raise FormatError("record declares no signals")

    sigs = []
    for line in lines[1 : 1 + nsig]:
        parts = line.split()
        if len(parts) < 2:
            raise FormatError(f"bad WFDB signal line {line!r}")
        fmt_field = parts[1]
        m = re.fullmatch(r"(\d+)", fmt_field)
        if m is None:
            raise UnsupportedFormatError(
                f"format field {fmt_field!r} carries a modifier; only plain 16/212 supported"
            )
        fmt = int(m.group(1))
        if fmt not in SUPPORTED_FORMATS:
            raise UnsupportedFormatError(f"WFDB storage format {fmt} not supported (only 16, 212)")

        gain, baseline, units = 200.0, None, ""
        if len(parts) > 2:
            gm = re.fullmatch(r"([-+0-9.eE]+)(\(([-+0-9]+)\))?(/(\S+))?", parts[2])
            if gm is None:
                raise FormatError(f"bad gain field {parts[2]!r}")
            gain = float(gm.group(1))
            if gm.group(3) is not None:
                baseline = int(gm.group(3))
            if gm.group(5) is not None:
                units = gm.group(5)
        if gain == 0:
            gain = 200.0  # WFDB convention: 0 means "assume default"
        adc_zero = int(parts[4]) if len(parts) > 4 else 0
        if baseline is None:
            baseline = adc_zero
        description = " ".join(parts[8:]) if len(parts) > 8 else f"sig{len(sigs)}"
        sigs.append(_SignalSpec(parts[0], fmt, gain, baseline, units, adc_zero, description))
    if len(sigs) != nsig:
        raise FormatError(f"header declares {nsig} signals, found {len(sigs)} signal lines")
    return record_name, fs, nsamp, sigs


def _decode_16(raw, nsig):
    data = np.frombuffer(raw, dtype="<i2")
    usable = (len(data) // nsig) * nsig
    return data[:usable].reshape(-1, nsig).astype(np.int64)


def _decode_212(raw, nsig):
    usable = (len(raw) // 3) * 3
    b = np.frombuffer(raw[:usable], dtype=np.uint8).reshape(-1, 3).astype(np.int64)
    first = ((b[:, 1] & 0x0F) << 8) | b[:, 0]
    second = ((b[:, 1] & 0xF0) << 4) | b[:, 2]
    samples = np.empty(2 * len(b), dtype=np.int64)
    samples[0::2] = first
    samples[1::2] = second
    samples[samples > 2047] -= 4096  # 12-bit two's complement
    usable = (len(samples) // nsig) * nsig
    return samples[:usable].reshape(-1, nsig)


def load_wfdb(path, record_id=None) -> SignalRecord:
    """Read a WFDB record (formats 16/212) into a SignalRecord."""
    base = path[:-4] if path.endswith(".hea") else path
    hea_path = base + ".hea"
    if not os.path.exists(hea_path):
        raise FileNotFoundError(hea_path)
    record_name, fs, nsamp, sigs = _parse_header(hea_path)

    fmts = {s.fmt for s in sigs}
    files = {s.file_name for s in sigs}
    if len(fmts) > 1 or len(files) > 1:
        raise UnsupportedFormatError("mixed-format or multi-file WFDB records not supported")
    dat_path = os.path.join(os.path.dirname(hea_path), sigs[0].file_name)
    with open(dat_path, "rb") as fh:
        raw = fh.read()
    nsig = len(sigs)
    decode = _decode_16 if sigs[0].fmt == 16 else _decode_212
    adc = decode(raw, nsig)
    if nsamp and len(adc) > nsamp:
        adc = adc[:nsamp]

    channels = {}
    for j, spec in enumerate(sigs):
        physical = (adc[:, j] - spec.baseline) / spec.gain
        channels[spec.description.lower()] = (physical, spec)

    def find(patterns):
        for name, payload in channels.items():
            if any(p in name for p in patterns):
                return payload
        return None

    ecg_payload = find(("ecg",)) or (next(iter(channels.values())) if channels else None)
    spo2_payload = find(_SPO2_PATTERNS)
    if ecg_payload is None:
        raise MissingChannelError(f"no ECG channel in {hea_path}")
    if spo2_payload is None:
        raise MissingChannelError(f"no SpO2 channel in {hea_path}")

    ecg, ecg_spec = ecg_payload
    spo2, spo2_spec = spo2_payload
    spo2, spo2_rate = _spo2_to_1hz(spo2, fs)

    return SignalRecord(
        record_id=record_id or record_name,
        ecg=np.asarray(ecg, dtype=np.float64),
        ecg_spec=ChannelSpec("ecg", fs, ecg_spec.units or "mV"),
        spo2=np.asarray(spo2, dtype=np.float64),
        spo2_spec=ChannelSpec("spo2", spo2_rate, spo2_spec.units or "%"),
    )


def _spo2_to_1hz(spo2, fs):
    """Average an oversampled SpO2 channel down to the nominal 1 Hz."""
    if fs <= 1:
        return spo2, fs
    per_sec = int(round(fs))
    if abs(fs - per_sec) > 1e-6:
        raise UnsupportedFormatError(f"cannot reduce SpO2 at non-integer rate {fs} Hz to 1 Hz")
    n = (len(spo2) // per_sec) * per_sec
    return spo2[:n].reshape(-1, per_sec).mean(axis=1), 1.0


# ---------------------------------------------------------------------------
# Writer stub (round-trip tests and fixture generation)
# ---------------------------------------------------------------------------

def write_wfdb(base_path, signals, fs, fmt=16, gains=None, baselines=None,
               units=None, descriptions=None):
    """Write a WFDB header/signal pair.

    ``signals`` is a list of integer ADC sample arrays (equal lengths).
    Supports formats 16 and 212 only; values must fit the sample width.
    """
    if fmt not in SUPPORTED_FORMATS:
        raise UnsupportedFormatError(f"cannot write format {fmt}")
    nsig = len(signals)
    lengths = {len(s) for s in signals}
    if len(lengths) != 1:
        raise ValueError("all signals must have equal length")
    nsamp = lengths.pop()
    gains = gains or [200.0] * nsig
    baselines = baselines or [0] * nsig
    units = units or ["mV"] * nsig
    descriptions = descriptions or [f"sig{i}" for i in range(nsig)]
    record_name = os.path.basename(base_path)

    adc = np.stack([np.asarray(s, dtype=np.int64) for s in signals], axis=1)
    limit = 32767 if fmt == 16 else 2047
    if np.abs(adc).max(initial=0) > limit:
        raise ValueError(f"sample out of range for format {fmt}")

    with open(base_path + ".hea", "w") as fh:
        fh.write(f"{record_name} {nsig} {fs:g} {nsamp}\n")
        for j in range(nsig):
            fh.write(
                f"{record_name}.dat {fmt} {gains[j]:g}({baselines[j]})/{units[j]} "
                f"12 0 0 0 0 {descriptions[j]}\n"
            )

    flat = adc.reshape(-1)
    if fmt == 16:
        raw = flat.astype("<i2").tobytes()
    else:
        vals = flat.copy()
        vals[vals < 0] += 4096
        if len(vals) % 2:
            vals = np.append(vals, 0)
        pairs = vals.reshape(-1, 2)
        raw = np.empty((len(pairs), 3), dtype=np.uint8)
        raw[:, 0] = pairs[:, 0] & 0xFF
        raw[:, 1] = ((pairs[:, 0] >> 8) & 0x0F) | (((pairs[:, 1] >> 8) & 0x0F) << 4)
        raw[:, 2] = pairs[:, 1] & 0xFF
        raw = raw.tobytes()
    with open(base_path + ".dat", "wb") as fh:
        fh.write(raw)
