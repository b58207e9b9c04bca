"""Cross-validation, metrics, and the processing-time benchmark.

Feature selection runs inside every training fold (never on test rows),
member quality for ensembles comes from an internal stratified holdout of
the fold-train data, and out-of-fold predictions are pooled into one
confusion table.  Undefined metrics are reported as absent, never zero.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from osadetect import classifiers as clf
from osadetect.classifiers.trees import stratified_split
from osadetect.fusion import FIXED_MEMBERS, RULES, EnsembleModel
from osadetect.mi import FeatureMatrix, forward_select
from osadetect.pipeline import FeatureConfig, feature_names, frame_vector, prepare_record


@dataclass(frozen=True)
class PipelineSpec:
    """What to run inside each fold: selection then one estimator."""

    estimator: str = "ensemble"       # algorithm id or "ensemble"
    third: str = "knn"                # ensemble third member
    rule: str = "majority_vote"
    select_k: int | None = 20         # None disables selection
    hyper: dict | None = None         # single-estimator hyperparameters
    quality_holdout: float = 0.25

    def label(self):
        if self.estimator == "ensemble":
            return f"{'+'.join(FIXED_MEMBERS)}+{self.third}:{self.rule}"
        return self.estimator


def metrics(tp, fn, tn, fp):
    """(sensitivity, specificity, accuracy); absent (None) on empty denominators."""
    for c in (tp, fn, tn, fp):
        if c < 0:
            raise ValueError("confusion counts must be non-negative")
    total = tp + fn + tn + fp
    if total == 0:
        raise ValueError("empty confusion table")
    sens = tp / (tp + fn) if tp + fn else None
    spec = tn / (tn + fp) if tn + fp else None
    return sens, spec, total and (tp + tn) / total


@dataclass
class ResultRow:
    name: str
    tp: int
    fn: int
    tn: int
    fp: int
    sensitivity: float | None
    specificity: float | None
    accuracy: float | None
    folds: list = field(default_factory=list)  # per-fold confusion dicts
    selected: list = field(default_factory=list)  # fold-train selections

    @classmethod
    def from_confusion(cls, name, tp, fn, tn, fp, folds=None, selected=None):
        sens, spec, acc = metrics(tp, fn, tn, fp)
        return cls(name, tp, fn, tn, fp, sens, spec, acc, folds or [], selected or [])


@dataclass
class EvalReport:
    rows: list
    config: dict
    seed: int
    n_folds: int
    processing_time_10_frames_s: float | None = None

    def to_dict(self):
        return {
            "format": "osadetect-report",
            "version": 1,
            "seed": self.seed,
            "n_folds": self.n_folds,
            "config": self.config,
            "processing_time_10_frames_s": self.processing_time_10_frames_s,
            "rows": [
                {
                    "name": r.name, "tp": r.tp, "fn": r.fn, "tn": r.tn, "fp": r.fp,
                    "sensitivity": r.sensitivity, "specificity": r.specificity,
                    "accuracy": r.accuracy, "folds": r.folds, "selected": r.selected,
                }
                for r in self.rows
            ],
        }

    @classmethod
    def from_dict(cls, d):
        rows = [
            ResultRow(r["name"], r["tp"], r["fn"], r["tn"], r["fp"], r["sensitivity"],
                      r["specificity"], r["accuracy"], r["folds"], r["selected"])
            for r in d["rows"]
        ]
        return cls(rows, d["config"], d["seed"], d["n_folds"],
                   d.get("processing_time_10_frames_s"))

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_csv(self, path, comments=()):
        with open(path, "w") as fh:
            for c in comments:
                fh.write(f"# {c}\n")
            fh.write("name,sensitivity_pct,specificity_pct,accuracy_pct,tp,fn,tn,fp\n")
            for r in self.rows:
                fh.write(",".join([
                    r.name, _pct(r.sensitivity), _pct(r.specificity), _pct(r.accuracy),
                    str(r.tp), str(r.fn), str(r.tn), str(r.fp),
                ]) + "\n")

    def to_text(self):
        header = f"{'Classifier':34s} {'Sens (%)':>9s} {'Spec (%)':>9s} {'Acc (%)':>9s}"
        if self.processing_time_10_frames_s is not None:
            header += f" {'t10 (s)':>9s}"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            line = (f"{r.name:34s} {_pct(r.sensitivity):>9s} {_pct(r.specificity):>9s} "
                    f"{_pct(r.accuracy):>9s}")
            if self.processing_time_10_frames_s is not None:
                line += f" {self.processing_time_10_frames_s:>9.3f}"
            lines.append(line)
        return "\n".join(lines)


def _pct(v):
    return "-" if v is None else f"{100.0 * v:.2f}"


def stratified_fold_indices(y, folds, seed):
    """Test-row index arrays; per-class sizes differ by at most one."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(y), dtype=int)
    for cls in np.unique(y):
        rows = np.flatnonzero(y == cls)
        if len(rows) < folds:
            raise ValueError(
                f"class {cls} has {len(rows)} rows, fewer than {folds} folds"
            )
        rows = rows[rng.permutation(len(rows))]
        assignment[rows] = np.arange(len(rows)) % folds
    return [np.flatnonzero(assignment == f) for f in range(folds)]


def _fold_seeds(seed, folds):
    ss = np.random.SeedSequence(seed)
    return [int(child.generate_state(1)[0]) for child in ss.spawn(folds)]


def fit_estimator(train: FeatureMatrix, spec: PipelineSpec, seed):
    """Train the configured estimator (single model or fixed-pair ensemble)."""
    if spec.estimator != "ensemble":
        return clf.train(spec.estimator, train, spec.hyper, seed)
    member_ids = list(FIXED_MEMBERS) + [spec.third]
    rng = np.random.default_rng(seed)
    fit_rows, quality_rows = stratified_split(train.y, 1.0 - spec.quality_holdout, rng)
    inner = train.subset_rows(fit_rows)
    holdout = train.subset_rows(quality_rows)
    quality = []
    for i, algo in enumerate(member_ids):
        probe = clf.train(algo, inner, None, seed + i + 1)
        sens, specificity = clf.model_quality(probe, holdout)
        quality.append((sens if sens is not None else 1.0,
                        specificity if specificity is not None else 1.0))
    members = [clf.train(algo, train, None, seed + i + 1) for i, algo in enumerate(member_ids)]
    return EnsembleModel(members, spec.rule, quality)


def _estimator_predict(model, X):
    if isinstance(model, EnsembleModel):
        return model.predict_proba_batch(X)
    return clf.predict_proba_batch(model, X)


def cross_validate(m: FeatureMatrix, spec: PipelineSpec, folds=10, seed=0) -> EvalReport:
    """Stratified k-fold evaluation with in-fold feature selection."""
    fold_rows = stratified_fold_indices(m.y, folds, seed)
    seeds = _fold_seeds(seed, folds)
    tp = fn = tn = fp = 0
    fold_stats, selections = [], []
    for f, test_rows in enumerate(fold_rows):
        train_rows = np.setdiff1d(np.arange(len(m)), test_rows)
        train = m.subset_rows(train_rows)
        test = m.subset_rows(test_rows)
        if spec.select_k:
            chosen = forward_select(train, min(spec.select_k, len(m.feature_names)))
            selections.append(chosen.names)
            train = train.select(chosen.names)
            test = test.select(chosen.names)
        model = fit_estimator(train, spec, seeds[f])
        p = _estimator_predict(model, test.X)
        pred = p >= 0.5
        truth = test.y.astype(bool)
        ftp = int(np.sum(pred & truth))
        ffn = int(np.sum(~pred & truth))
        ftn = int(np.sum(~pred & ~truth))
        ffp = int(np.sum(pred & ~truth))
        tp, fn, tn, fp = tp + ftp, fn + ffn, tn + ftn, fp + ffp
        fold_stats.append({"fold": f, "tp": ftp, "fn": ffn, "tn": ftn, "fp": ffp})

    row = ResultRow.from_confusion(spec.label(), tp, fn, tn, fp, fold_stats, selections)
    config = {
        "estimator": spec.estimator, "third": spec.third, "rule": spec.rule,
        "select_k": spec.select_k, "hyper": spec.hyper,
        "quality_holdout": spec.quality_holdout,
    }
    return EvalReport([row], config, seed, folds)


def evaluate_suite(m: FeatureMatrix, specs, folds=10, seed=0) -> EvalReport:
    """Evaluate several pipeline specs into one multi-row report."""
    rows = []
    config = {"suite": [s.label() for s in specs]}
    for s in specs:
        rep = cross_validate(m, s, folds, seed)
        rows.extend(rep.rows)
        config[s.label()] = rep.config
    return EvalReport(rows, config, seed, folds)


# ---------------------------------------------------------------------------
# Timing
# ---------------------------------------------------------------------------

def time_frames(record, model=None, cfg: FeatureConfig = FeatureConfig(), n_frames=10,
                repeats=5) -> float:
    """Median wall-clock seconds to featurize and classify ``n_frames`` frames.

    ``model=None`` times feature extraction alone (no prediction stage).
    """
    prep = prepare_record(record, cfg, labeled=False)
    if len(prep.frames) < n_frames:
        raise ValueError(f"record supplies {len(prep.frames)} frames, need {n_frames}")
    frames = prep.frames[:n_frames]
    names = feature_names(cfg)
    durations = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        vecs = np.vstack([frame_vector(prep, fr, cfg).values for fr in frames])
        if model is not None:
            sub = _align_features(vecs, names, model)
            _estimator_predict(model, sub)
        durations.append(time.perf_counter() - t0)
    return float(np.median(durations))


def _align_features(vecs, names, model):
    want = model.feature_names
    idx = [names.index(n) for n in want]
    return vecs[:, idx]
