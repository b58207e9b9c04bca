"""Command-line front end: ingest -> features -> select -> train -> eval -> detect.

Every artifact embeds the hash of the resolved configuration, outputs are
written atomically (no partial files on failure), and identical
config+seed reruns produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from osadetect import classifiers as clf
from osadetect import evaluate as ev
from osadetect.fusion import RULE_ABBREV, RULES, EnsembleModel, load_ensemble, save_ensemble
from osadetect.mi import FeatureMatrix, SelectedFeatureSet, forward_select
from osadetect.pipeline import FeatureConfig, build_feature_matrix, feature_names, \
    frame_vector, prepare_record
from osadetect.preprocess import DenoiseConfig
from osadetect.records import load_record, write_record
from osadetect.synth import SynthParams, synth_generate

THIRD_CHOICES = {"knn": "knn", "dt": "decision_table", "c45": "c45_tree", "rept": "rep_tree"}


def config_hash(namespace, exclude=("out", "report_dir", "write_native")):
    payload = {k: v for k, v in sorted(vars(namespace).items())
               if k not in exclude and not k.startswith("_") and k != "func"}
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode())
    return digest.hexdigest()[:16]


def _atomic_write(path, writer):
    tmp = path + ".tmp"
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def _feature_config(args) -> FeatureConfig:
    return FeatureConfig(
        denoise=DenoiseConfig(levels=args.wavelet_levels, detrend=not args.no_detrend),
        target_fs=args.target_fs,
        edr_method=args.edr,
        min_overlap_s=args.min_overlap,
    )


def _add_feature_flags(p):
    p.add_argument("--wavelet-levels", type=int, default=7)
    p.add_argument("--no-detrend", action="store_true")
    p.add_argument("--target-fs", type=float, default=250.0)
    p.add_argument("--edr", choices=("qrs_area", "t_wave"), default="qrs_area")
    p.add_argument("--min-overlap", type=float, default=10.0,
                   help="seconds of event overlap that make a frame apnoeic")


def _add_format_flag(p):
    p.add_argument("--format", choices=("native-csv", "wfdb"), default="native-csv")


def _load_records(paths, fmt):
    return [load_record(p, fmt) for p in paths]


def cmd_ingest(args):
    record = load_record(args.input, args.format)
    cfg = _feature_config(args)
    prep = prepare_record(record, cfg)
    n_apn = sum(1 for f in prep.frames if f.label == "apnoeic")
    print(f"record {record.record_id}: {record.duration_s:.0f} s, "
          f"ecg {prep.fs:g} Hz, spo2 {record.spo2_spec.sampling_rate_hz:g} Hz")
    print(f"retained frames: {len(prep.frames)} ({n_apn} apnoeic), "
          f"excluded seconds: {int(prep.record.excluded_mask.sum())}, "
          f"baseline: {prep.baseline:.0f}%")
    if args.write_native:
        write_record(record, args.write_native)
        print(f"wrote native copy to {args.write_native}.csv")
    return 0


def cmd_features(args):
    cfg = _feature_config(args)
    records = _load_records(args.inputs, args.format)
    matrix = build_feature_matrix(records, cfg)
    _atomic_write(args.out, lambda p: matrix.to_csv(p, [f"config_hash={config_hash(args)}"]))
    print(f"wrote {len(matrix)} frames x {len(matrix.feature_names)} features to {args.out}")
    return 0


def cmd_select(args):
    matrix = FeatureMatrix.from_csv(args.matrix)
    chosen = forward_select(matrix, args.k)
    _atomic_write(args.out, lambda p: chosen.to_csv(p, [f"config_hash={config_hash(args)}"]))
    print(f"selected {len(chosen)} features -> {args.out}")
    return 0


def _parse_hyper(pairs):
    hyper = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise SystemExit(f"bad --hyper {pair!r}; expected key=value")
        key, value = pair.split("=", 1)
        try:
            hyper[key] = int(value)
        except ValueError:
            try:
                hyper[key] = float(value)
            except ValueError:
                hyper[key] = value
    return hyper


def cmd_train(args):
    matrix = FeatureMatrix.from_csv(args.matrix)
    if args.selected:
        matrix = matrix.select(SelectedFeatureSet.from_csv(args.selected).names)
    meta = {"config_hash": config_hash(args)}
    if args.algo == "ensemble":
        spec = ev.PipelineSpec(estimator="ensemble", third=THIRD_CHOICES[args.third],
                               rule=RULE_ABBREV[args.rule], select_k=None)
        model = ev.fit_estimator(matrix, spec, args.seed)
        _atomic_write(args.out, lambda p: save_ensemble(model, p, meta))
    else:
        model = clf.train(args.algo, matrix, _parse_hyper(args.hyper), args.seed)
        _atomic_write(args.out, lambda p: clf.save_model(model, p, meta))
    print(f"trained {args.algo} on {len(matrix)} frames -> {args.out}")
    return 0


def cmd_eval(args):
    matrix = FeatureMatrix.from_csv(args.matrix)
    specs = []
    for name in args.algo.split(","):
        name = name.strip()
        if name == "ensemble":
            specs.append(ev.PipelineSpec(estimator="ensemble", third=THIRD_CHOICES[args.third],
                                         rule=RULE_ABBREV[args.rule], select_k=args.select_k))
        else:
            specs.append(ev.PipelineSpec(estimator=name, select_k=args.select_k))
    report = ev.evaluate_suite(matrix, specs, folds=args.folds, seed=args.seed)

    if args.time_record:
        record = load_record(args.time_record, args.format)
        cfg = _feature_config(args)
        spec = specs[0]
        sub = matrix
        if spec.select_k:
            sub = matrix.select(forward_select(matrix, spec.select_k).names)
        model = ev.fit_estimator(sub, spec, args.seed)
        report.processing_time_10_frames_s = ev.time_frames(record, model, cfg)

    os.makedirs(args.report_dir, exist_ok=True)
    chash = config_hash(args)
    report.config["config_hash"] = chash
    base = os.path.join(args.report_dir, "report")
    _atomic_write(base + ".json", report.to_json)
    _atomic_write(base + ".csv", lambda p: report.to_csv(p, [f"config_hash={chash}"]))
    _atomic_write(base + ".txt", lambda p: open(p, "w").write(report.to_text() + "\n"))
    print(report.to_text())
    return 0


def _load_any_model(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") == "osadetect-ensemble":
        return EnsembleModel.from_dict(doc)
    return clf.ClassifierModel.from_dict(doc)


def cmd_detect(args):
    model = _load_any_model(args.model)
    record = load_record(args.input, args.format)
    cfg = _feature_config(args)
    prep = prepare_record(record, cfg, labeled=False)
    names = feature_names(cfg)
    idx = [names.index(n) for n in model.feature_names]
    for frame in prep.frames:
        t0 = time.perf_counter()
        vec = frame_vector(prep, frame, cfg).values[idx]
        if isinstance(model, EnsembleModel):
            p = float(model.predict_proba_batch(vec[None, :])[0])
        else:
            p = clf.predict_proba(model, vec).p_apnea
        latency_ms = (time.perf_counter() - t0) * 1000.0
        decision = "apnoeic" if p >= 0.5 else "normal"
        print(f"{frame.index},{decision},{p:.6f},{latency_ms:.1f}")
    return 0


def cmd_synth(args):
    params = SynthParams(
        duration_s=args.duration, apnea_rate=args.apnea_rate,
        event_duration_s=args.event_duration, desat_depth_pct=args.desat_depth,
        desat_duration_s=args.desat_duration, cvhr_depth=args.cvhr_depth,
        noise_level=args.noise, ecg_fs=args.ecg_fs, seed=args.seed,
    )
    record = synth_generate(params)
    write_record(record, args.out)
    n_events = len(record.annotations)
    print(f"wrote {record.duration_s:.0f} s synthetic record with {n_events} events to {args.out}.csv")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="osadetect",
                                     description="Frame-level sleep apnea detection "
                                                 "from ECG and SpO2.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a record and print a summary")
    p.add_argument("input")
    _add_format_flag(p)
    _add_feature_flags(p)
    p.add_argument("--write-native", metavar="BASE", help="write a native-csv copy")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("features", help="extract the per-frame feature matrix")
    p.add_argument("inputs", nargs="+")
    _add_format_flag(p)
    _add_feature_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("select", help="MI forward feature selection")
    p.add_argument("--matrix", required=True)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="train a classifier or the 3-member ensemble")
    p.add_argument("--matrix", required=True)
    p.add_argument("--algo", default="ensemble",
                   choices=clf.ALGORITHMS + ("ensemble",))
    p.add_argument("--third", choices=tuple(THIRD_CHOICES), default="knn")
    p.add_argument("--rule", choices=tuple(RULE_ABBREV), default="mv")
    p.add_argument("--selected", help="restrict to a selected-feature CSV")
    p.add_argument("--hyper", action="append", metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="10-fold cross-validation report")
    p.add_argument("--matrix", required=True)
    p.add_argument("--algo", default="ensemble",
                   help="comma-separated algorithm ids and/or 'ensemble'")
    p.add_argument("--third", choices=tuple(THIRD_CHOICES), default="knn")
    p.add_argument("--rule", choices=tuple(RULE_ABBREV), default="mv")
    p.add_argument("--select-k", type=int, default=20)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--time-record", help="record used for the 10-frame timing benchmark")
    _add_format_flag(p)
    _add_feature_flags(p)
    p.add_argument("--report-dir", default=os.environ.get("OSADETECT_REPORT_DIR", "."))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("detect", help="stream per-minute decisions for a record")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True)
    _add_format_flag(p)
    _add_feature_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("synth", help="generate a labeled synthetic record")
    p.add_argument("--duration", type=float, default=3600.0)
    p.add_argument("--apnea-rate", type=float, default=0.4)
    p.add_argument("--event-duration", type=float, default=25.0)
    p.add_argument("--desat-depth", type=float, default=6.0)
    p.add_argument("--desat-duration", type=float, default=30.0)
    p.add_argument("--cvhr-depth", type=float, default=0.25)
    p.add_argument("--noise", type=float, default=0.03)
    p.add_argument("--ecg-fs", type=float, default=250.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, metavar="BASE")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
