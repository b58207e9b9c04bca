"""Record loading, 1-minute framing, and frame labeling.

Native format: per-record trio of files sharing a basename

    <base>.csv       sample columns, one per channel (shorter channels
                     leave trailing cells empty)
    <base>.hdr       sidecar header, one ``channel,rate_hz,units`` line
                     per channel
    <base>.ann.csv   optional annotations, ``start_s,duration_s,kind``

WFDB header/signal pairs (storage formats 16 and 212) are handled by
:mod:`osadetect.wfdb_io` and dispatched from :func:`load_record`.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, replace

import numpy as np

FRAME_SECONDS = 60.0

APNEA_KINDS = ("apnea", "hypopnea")


class FormatError(ValueError):
    """Input file does not conform to the declared format."""


class MissingChannelError(FormatError):
    """A required channel (ecg or spo2) is absent from the record."""


@dataclass(frozen=True)
class ChannelSpec:
    name: str
    sampling_rate_hz: float
    units: str = ""

    def __post_init__(self):
        if self.sampling_rate_hz <= 0:
            raise ValueError(f"sampling rate must be positive, got {self.sampling_rate_hz}")


@dataclass(frozen=True)
class EventAnnotation:
    start_s: float
    duration_s: float
    kind: str

    def __post_init__(self):
        if self.start_s < 0:
            raise ValueError(f"annotation start {self.start_s} is negative")
        if self.duration_s <= 0:
            raise ValueError(f"annotation duration {self.duration_s} is not positive")

    @property
    def end_s(self):
        return self.start_s + self.duration_s

    @property
    def is_event(self):
        return self.kind in APNEA_KINDS


@dataclass
class SignalRecord:
    record_id: str
    ecg: np.ndarray
    ecg_spec: ChannelSpec
    spo2: np.ndarray
    spo2_spec: ChannelSpec
    annotations: list[EventAnnotation] = field(default_factory=list)
    excluded_mask: np.ndarray | None = None  # per SpO2 sample (per second)

    def __post_init__(self):
        self.ecg = np.asarray(self.ecg, dtype=np.float64)
        self.spo2 = np.asarray(self.spo2, dtype=np.float64)
        if self.excluded_mask is None:
            self.excluded_mask = np.zeros(len(self.spo2), dtype=bool)
        else:
            self.excluded_mask = np.asarray(self.excluded_mask, dtype=bool)
        if len(self.excluded_mask) != len(self.spo2):
            raise ValueError("excluded_mask length must equal spo2 length")
        # Channels must cover the same span within one SpO2 sample period.
        skew = abs(self.duration_s - len(self.spo2) / self.spo2_spec.sampling_rate_hz)
        if skew > 1.0 / self.spo2_spec.sampling_rate_hz + 1e-9:
            raise FormatError(
                f"ecg ({self.duration_s:.1f}s) and spo2 "
                f"({len(self.spo2) / self.spo2_spec.sampling_rate_hz:.1f}s) spans disagree"
            )
        for ann in self.annotations:
            if ann.end_s > self.duration_s + 1e-9:
                raise FormatError(
                    f"annotation at {ann.start_s}s extends past record end ({self.duration_s}s)"
                )

    @property
    def duration_s(self):
        return len(self.ecg) / self.ecg_spec.sampling_rate_hz

    def with_mask(self, mask):
        return replace(self, excluded_mask=np.asarray(mask, dtype=bool))


@dataclass
class Frame:
    index: int
    start_s: float
    ecg_slice: slice
    spo2_slice: slice
    label: str = "unlabeled"  # apnoeic | normal | unlabeled


def _samples_per_frame(rate_hz):
    n = FRAME_SECONDS * rate_hz
    if abs(n - round(n)) > 1e-6:
        raise ValueError(f"rate {rate_hz} Hz does not yield an integer number of samples per minute")
    return int(round(n))


def segment_frames(record: SignalRecord) -> list[Frame]:
    """Cut a record into non-overlapping 60 s frames.

    The trailing remainder shorter than one frame is dropped, as is any
    frame whose SpO2 seconds intersect the artifact exclusion mask.
    """
    n_ecg = _samples_per_frame(record.ecg_spec.sampling_rate_hz)
    n_spo2 = _samples_per_frame(record.spo2_spec.sampling_rate_hz)
    n_frames = min(len(record.ecg) // n_ecg, len(record.spo2) // n_spo2)
    frames = []
    for i in range(n_frames):
        spo2_slice = slice(i * n_spo2, (i + 1) * n_spo2)
        if record.excluded_mask[spo2_slice].any():
            continue
        frames.append(
            Frame(
                index=i,
                start_s=i * FRAME_SECONDS,
                ecg_slice=slice(i * n_ecg, (i + 1) * n_ecg),
                spo2_slice=spo2_slice,
            )
        )
    return frames


def label_frames(frames, annotations, min_overlap_s=10.0) -> list[Frame]:
    """Label each frame apnoeic iff cumulative apnea/hypopnea overlap >= min_overlap_s."""
    if not 0 < min_overlap_s <= FRAME_SECONDS:
        raise ValueError(f"min_overlap_s must be in (0, {FRAME_SECONDS}], got {min_overlap_s}")
    events = [a for a in annotations if a.is_event]
    out = []
    for f in frames:
        f_end = f.start_s + FRAME_SECONDS
        overlap = 0.0
        for ev in events:
            overlap += max(0.0, min(f_end, ev.end_s) - max(f.start_s, ev.start_s))
        label = "apnoeic" if overlap >= min_overlap_s else "normal"
        out.append(replace_label(f, label))
    return out


def replace_label(frame: Frame, label: str) -> Frame:
    return Frame(frame.index, frame.start_s, frame.ecg_slice, frame.spo2_slice, label)


# ---------------------------------------------------------------------------
# Native CSV format
# ---------------------------------------------------------------------------

def _sidecar_paths(path):
    base = path[:-4] if path.endswith(".csv") else path
    return base + ".csv", base + ".hdr", base + ".ann.csv"


def _read_header(hdr_path):
    specs = {}
    with open(hdr_path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            if len(row) < 2:
                raise FormatError(f"bad header line {row!r} in {hdr_path}")
            name = row[0].strip().lower()
            if name in specs:
                raise FormatError(f"duplicate channel {name!r} in {hdr_path}")
            units = row[2].strip() if len(row) > 2 else ""
            try:
                rate = float(row[1])
            except ValueError as exc:
                raise FormatError(f"bad rate {row[1]!r} in {hdr_path}") from exc
            specs[name] = ChannelSpec(name, rate, units)
    return specs


def read_annotations(path) -> list[EventAnnotation]:
    """Read a ``start_s,duration_s,kind`` CSV annotation file."""
    anns = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for row in reader:
            if not row or row[0].startswith("#"):
                continue
            if row[0].strip().lower() == "start_s":  # header row
                continue
            if len(row) < 3:
                raise FormatError(f"bad annotation line {row!r} in {path}")
            try:
                start, dur = float(row[0]), float(row[1])
            except ValueError as exc:
                raise FormatError(f"non-numeric annotation fields in {row!r}") from exc
            anns.append(EventAnnotation(start, dur, row[2].strip().lower()))
    starts = [a.start_s for a in anns]
    if any(b < a for a, b in zip(starts, starts[1:])):
        raise FormatError(f"annotation start times not monotone in {path}")
    return anns


def write_annotations(annotations, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["start_s", "duration_s", "kind"])
        for a in annotations:
            writer.writerow([repr(float(a.start_s)), repr(float(a.duration_s)), a.kind])


def _load_native(path, record_id=None):
    csv_path, hdr_path, ann_path = _sidecar_paths(path)
    if not os.path.exists(csv_path):
        raise FileNotFoundError(csv_path)
    if not os.path.exists(hdr_path):
        raise FormatError(f"native-csv record {csv_path} is missing its header sidecar {hdr_path}")
    specs = _read_header(hdr_path)
    for required in ("ecg", "spo2"):
        if required not in specs:
            raise MissingChannelError(f"channel {required!r} not declared in {hdr_path}")

    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            columns = [c.strip().lower() for c in next(reader)]
        except StopIteration:
            raise FormatError(f"{csv_path} is empty") from None
        data = {c: [] for c in columns}
        for row in reader:
            for name, cell in zip(columns, row):
                cell = cell.strip()
                if cell:
                    data[name].append(float(cell))
    for required in ("ecg", "spo2"):
        if required not in data:
            raise MissingChannelError(f"column {required!r} not present in {csv_path}")

    annotations = read_annotations(ann_path) if os.path.exists(ann_path) else []
    rid = record_id or os.path.splitext(os.path.basename(csv_path))[0]
    return SignalRecord(
        record_id=rid,
        ecg=np.array(data["ecg"]),
        ecg_spec=specs["ecg"],
        spo2=np.array(data["spo2"]),
        spo2_spec=specs["spo2"],
        annotations=annotations,
    )


def write_record(record: SignalRecord, path):
    """Write a record in the native CSV format (exact float round-trip)."""
    csv_path, hdr_path, ann_path = _sidecar_paths(path)
    with open(hdr_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for spec in (record.ecg_spec, record.spo2_spec):
            writer.writerow([spec.name, repr(spec.sampling_rate_hz), spec.units])
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ecg", "spo2"])
        n = max(len(record.ecg), len(record.spo2))
        for i in range(n):
            e = repr(float(record.ecg[i])) if i < len(record.ecg) else ""
            s = repr(float(record.spo2[i])) if i < len(record.spo2) else ""
            writer.writerow([e, s])
    if record.annotations:
        write_annotations(record.annotations, ann_path)


def load_record(path, fmt="native-csv", record_id=None) -> SignalRecord:
    """Load a recording in the given format ("native-csv" or "wfdb")."""
    if fmt == "native-csv":
        return _load_native(path, record_id)
    if fmt == "wfdb":
        from osadetect import wfdb_io

        return wfdb_io.load_wfdb(path, record_id=record_id)
    raise ValueError(f"unknown record format {fmt!r}")
