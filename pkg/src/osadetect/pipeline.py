"""Frame-level feature extraction pipeline.

Processing is frame-local: each 1-minute frame is denoised, beat-detected
and featurized independently, so batch evaluation and streaming detection
produce identical vectors frame for frame.  Only the SpO2 baseline is a
whole-recording quantity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from osadetect import ecg_features as ef
from osadetect import spo2_features as sf
from osadetect.mi import FeatureMatrix
from osadetect.preprocess import DenoiseConfig, downsample_ecg, reject_spo2_artifacts, wavelet_denoise
from osadetect.qrs import EDRSeries, RRTachogram, detect_qrs, extract_edr_qrs_area, \
    extract_edr_t_wave, remove_ectopic, screen_beats
from osadetect.records import SignalRecord, label_frames, segment_frames

TARGET_FS = 250.0


@dataclass(frozen=True)
class FeatureConfig:
    denoise: DenoiseConfig = field(default_factory=DenoiseConfig)
    target_fs: float = TARGET_FS
    edr_method: str = "qrs_area"  # or "t_wave"
    grid_size: int = ef.GRID_SIZE
    min_overlap_s: float = 10.0

    def grid(self):
        return ef.default_grid(self.grid_size)


def _names_spo2():
    names = ["spo2_min", "spo2_mean", "S_spo2"]
    names += [f"r_spo2_{k}" for k in sf.SEQ_LAGS]
    names += [f"MI_spo2_{k}" for k in sf.SEQ_LAGS]
    names += ["ZC_spo2", "slope_spo2", "intercept_spo2", "ApEn", "SpEn", "LZC"]
    names += [f"CTM_{r:g}" for r in sf.CTM_RADII]
    names += ["Delta", "baseline"]
    names += [f"odi{d}" for d in sf.ODI_DEPTHS]
    names += [f"ODI{d}{y}" for d in sf.ODI_XY_DEPTHS for y in sf.ODI_XY_DURATIONS]
    names += [f"ODIS{d}" for d in sf.ODIS_DEPTHS]
    names += [f"tsa{lvl}" for lvl in sf.TSA_LEVELS]
    return names


def _names_ecg_time():
    names = ["mid_time", "m", "mean_rr", "NN50v1", "NN50v2", "pNN50v1", "pNN50v2",
             "S_rr", "S_DSD", "RMSSD"]
    names += [f"r_{k}" for k in ef.SEQ_LAGS]
    names += [f"MI_{k}" for k in ef.SEQ_LAGS]
    names += [f"AF_{k}" for k in ef.ALLAN_SCALES_S]
    names += ["NEP", "mean_edr", "S_edr"]
    return names


def _names_spectral(tag, grid_size):
    names = [f"S2_D{tag}_{k}" for k in ef.WAVELET_LEVEL_RANGE]
    names += [f"S2_D{tag}_LF", f"S2_D{tag}_HF"]
    names += [f"P_{tag}_LF", f"P_{tag}_HF", f"LF_HF_{tag}"]
    names += [f"P_{tag}_{i}" for i in range(1, grid_size + 1)]
    names += [f"w_resp_{tag}", f"respMag_{tag}", f"respProb_{tag}",
              f"w_ProbMax_{tag}", f"ProbMax_{tag}", f"ProbMaxMag_{tag}"]
    return names


SPO2_FEATURE_NAMES = tuple(_names_spo2())


def feature_names(cfg: FeatureConfig = FeatureConfig()) -> list[str]:
    """The frozen feature ordering shared by every matrix and model."""
    return (_names_spo2() + _names_ecg_time()
            + _names_spectral("rr", cfg.grid_size) + _names_spectral("edr", cfg.grid_size))


def is_spo2_feature(name):
    return name in SPO2_FEATURE_NAMES


def maybe_downsample(ecg, fs, target_fs):
    """Decimate when fs/target is an integer > 1; otherwise keep the native rate."""
    if target_fs and fs > target_fs:
        factor = fs / target_fs
        if abs(factor - round(factor)) < 1e-9:
            return downsample_ecg(ecg, fs, target_fs), target_fs
    return np.asarray(ecg, dtype=np.float64), fs


@dataclass
class FrameResult:
    values: np.ndarray
    low_quality: bool


def extract_frame_features(ecg_frame, fs, spo2_frame, baseline,
                           cfg: FeatureConfig = FeatureConfig()) -> FrameResult:
    """Feature vector for one frame of raw ECG plus its 60 SpO2 samples."""
    ecg_d = wavelet_denoise(np.asarray(ecg_frame, dtype=np.float64), cfg.denoise)
    detection = detect_qrs(ecg_d, fs)
    beats = detection.beats
    raw_tach = RRTachogram.from_beats(beats)
    tach = remove_ectopic(raw_tach, beats) if len(raw_tach) else RRTachogram.empty()
    good_beats = screen_beats(beats)
    if cfg.edr_method == "t_wave":
        edr = extract_edr_t_wave(ecg_d, fs, good_beats)
    else:
        edr = extract_edr_qrs_area(ecg_d, fs, good_beats)

    grid = cfg.grid()
    spo2 = np.asarray(spo2_frame, dtype=np.float64)

    stats = sf.spo2_basic_stats(spo2)
    r_s, mi_s = sf.spo2_sequential_deps(spo2)
    apen, sampen, lzc, ctm, delta = sf.spo2_complexity(spo2)
    desat = sf.spo2_desaturation(spo2, baseline)

    time_feats = ef.ecg_time_features(tach, edr)
    rr_spec = ef.hrv_spectral_features(tach, grid)
    rr_wave = ef.dwt_detail_variances(tach.rr_ms)
    edr_spec = ef.edr_spectral_features(edr, grid)
    edr_wave = ef.dwt_detail_variances(edr.values)

    vec = [stats.minimum, stats.mean, stats.std]
    vec += [r_s[k] for k in sf.SEQ_LAGS]
    vec += [mi_s[k] for k in sf.SEQ_LAGS]
    vec += [stats.mean_crossings, stats.slope, stats.intercept, apen, sampen, lzc]
    vec += [ctm[r] for r in sf.CTM_RADII]
    vec += [delta, baseline]
    vec += [desat.odi[d] for d in sf.ODI_DEPTHS]
    vec += [desat.odi_xy[(d, y)] for d in sf.ODI_XY_DEPTHS for y in sf.ODI_XY_DURATIONS]
    vec += [desat.odis[d] for d in sf.ODIS_DEPTHS]
    vec += [desat.tsa[lvl] for lvl in sf.TSA_LEVELS]

    vec += [time_feats.mid_time_s, time_feats.m, time_feats.mean_rr_ms,
            time_feats.nn50_v1, time_feats.nn50_v2, time_feats.pnn50_v1,
            time_feats.pnn50_v2, time_feats.sdnn_ms, time_feats.sdsd_ms,
            time_feats.rmssd_ms]
    vec += [time_feats.r_k[k] for k in ef.SEQ_LAGS]
    vec += [time_feats.mi_k[k] for k in ef.SEQ_LAGS]
    vec += [time_feats.allan_k[k] for k in ef.ALLAN_SCALES_S]
    vec += [time_feats.nep, time_feats.edr_mean, time_feats.edr_std]

    for spec, wave in ((rr_spec, rr_wave), (edr_spec, edr_wave)):
        vec += [wave.level(k) for k in ef.WAVELET_LEVEL_RANGE]
        vec += [wave.lf_aggregate, wave.hf_aggregate]
        vec += [spec.p_lf, spec.p_hf, spec.lf_hf_ratio]
        vec += list(spec.grid_samples)
        vec += [spec.omega_resp_hz, spec.resp_mag, spec.resp_prob,
                spec.omega_probmax_hz, spec.probmax, spec.probmax_mag]

    low_quality = detection.low_quality or time_feats.low_quality
    return FrameResult(np.asarray(vec, dtype=np.float64), low_quality)


@dataclass
class PreparedRecord:
    record: SignalRecord
    frames: list
    baseline: float
    fs: float  # ECG rate after optional decimation


def prepare_record(record: SignalRecord, cfg: FeatureConfig = FeatureConfig(),
                   labeled=True) -> PreparedRecord:
    """Artifact rejection, optional decimation, framing, and labeling."""
    ecg, fs = maybe_downsample(record.ecg, record.ecg_spec.sampling_rate_hz, cfg.target_fs)
    if fs != record.ecg_spec.sampling_rate_hz:
        from dataclasses import replace

        record = replace(record, ecg=ecg,
                         ecg_spec=replace(record.ecg_spec, sampling_rate_hz=fs))
    record = reject_spo2_artifacts(record)
    frames = segment_frames(record)
    if labeled:
        frames = label_frames(frames, record.annotations, cfg.min_overlap_s)
    baseline = sf.compute_baseline(record)
    return PreparedRecord(record, frames, baseline, fs)


def frame_vector(prep: PreparedRecord, frame, cfg: FeatureConfig = FeatureConfig()) -> FrameResult:
    ecg_frame = prep.record.ecg[frame.ecg_slice]
    spo2_frame = prep.record.spo2[frame.spo2_slice]
    return extract_frame_features(ecg_frame, prep.fs, spo2_frame, prep.baseline, cfg)


def build_feature_matrix(records, cfg: FeatureConfig = FeatureConfig()) -> FeatureMatrix:
    """Per-frame feature matrix over one or more labeled records."""
    names = feature_names(cfg)
    rows, labels, rids, fidx = [], [], [], []
    for record in records:
        prep = prepare_record(record, cfg)
        for frame in prep.frames:
            result = frame_vector(prep, frame, cfg)
            rows.append(result.values)
            labels.append(1 if frame.label == "apnoeic" else 0)
            rids.append(record.record_id)
            fidx.append(frame.index)
    if not rows:
        raise ValueError("no retained frames in the given records")
    return FeatureMatrix(names, np.vstack(rows), np.array(labels), rids, np.array(fidx))
