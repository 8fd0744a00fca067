"""Subject-stratified cross-validation over the feature configurations,
subject-level aggregation, metrics, decade breakdown, learning curve, and
zero-shot evaluation of external predictions.

Training rows are segment-level (demographics replicated per segment);
evaluation is subject-level: each held-out subject's segment predictions are
averaged into a single age estimate.  Metrics are pooled over the merged
cross-validated predictions; the quoted SD is the standard deviation of the
per-fold subject-level MAEs.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import Cohort, SubjectData
from .errors import LeakageError, PpgBenchError
from .model import ALPHA_GRID, baseline_fit, fit_with_alpha_selection
from .rng import Xoshiro256StarStar, mix_seed

CONFIG_NAMES = (
    "baseline",
    "hr_only",
    "hr_hrv",
    "demog_only",
    "sex_only",
    "hr_hrv_demog",
    "ppg_only",
    "ppg_demog",
)

DECADE_BINS = ((20, 40), (40, 50), (50, 60), (60, 70), (70, 80), (80, 100))

DEFAULT_LEARNING_SIZES = (20, 50, 100, 200, 400, 700, "all")


@dataclass(frozen=True)
class FeatureConfig:
    name: str
    embedding_model: str | None = None

    def __post_init__(self):
        if self.name not in CONFIG_NAMES:
            raise ValueError(f"unknown config {self.name!r}")
        needs_embeddings = self.name.startswith("ppg_")
        if needs_embeddings and not self.embedding_model:
            raise ValueError(f"config {self.name!r} requires an embedding model")
        if not needs_embeddings and self.embedding_model:
            raise ValueError(f"config {self.name!r} forbids an embedding model")


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    fold_of: dict[str, int]

    def subjects_in(self, fold: int) -> list[str]:
        return sorted(s for s, f in self.fold_of.items() if f == fold)


@dataclass
class SubjectPrediction:
    subject_id: str
    age_years: float
    prediction: float
    fold: int


@dataclass
class FoldResult:
    fold: int
    n_train_subjects: int
    n_test_subjects: int
    alpha: float | None
    mae: float


@dataclass
class EvalReport:
    config: str
    embedding_model: str | None
    k: int
    predictions: list[SubjectPrediction]
    fold_results: list[FoldResult]
    pooled_mae: float
    fold_mae_sd: float
    pooled_r2: float
    pooled_r: float
    dropped_segments: int
    decade_table: list[dict] = field(default_factory=list)
    decade_exclusions: int = 0
    learning_curve: list[dict] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "embedding_model": self.embedding_model,
            "k": self.k,
            "pooled_mae": self.pooled_mae,
            "fold_mae_sd": self.fold_mae_sd,
            "pooled_r2": self.pooled_r2,
            "pooled_r": self.pooled_r,
            "dropped_segments": self.dropped_segments,
            "folds": [
                {
                    "fold": f.fold,
                    "n_train_subjects": f.n_train_subjects,
                    "n_test_subjects": f.n_test_subjects,
                    "alpha": f.alpha,
                    "mae": f.mae,
                }
                for f in self.fold_results
            ],
            "decade_table": self.decade_table,
            "decade_exclusions": self.decade_exclusions,
            "learning_curve": self.learning_curve,
            "diagnostics": self.diagnostics,
            "predictions": [
                {
                    "subject_id": p.subject_id,
                    "age_years": p.age_years,
                    "prediction": p.prediction,
                    "fold": p.fold,
                }
                for p in sorted(self.predictions, key=lambda p: p.subject_id)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def thread_count() -> int:
    """Internal parallelism cap from PPGBENCH_THREADS (default 1)."""
    raw = os.environ.get("PPGBENCH_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise PpgBenchError(f"PPGBENCH_THREADS must be a positive integer, got {raw!r}")
    if n < 1:
        raise PpgBenchError("PPGBENCH_THREADS must be a positive integer")
    return n


def assign_stratified_folds(subjects, k: int = 5) -> FoldAssignment:
    """Deterministic round-robin fold assignment within age-decade strata.

    Subjects are grouped by floor(age/10), sorted by subject_id within each
    stratum, and dealt to folds 0..k-1 cyclically.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    records = [getattr(s, "record", s) for s in subjects]
    if len(records) < k:
        raise ValueError("fewer subjects than folds")
    ids = [r.subject_id for r in records]
    if len(set(ids)) != len(ids):
        raise LeakageError("duplicate subject_id in cohort")
    strata: dict[int, list] = {}
    for r in records:
        strata.setdefault(int(r.age_years // 10), []).append(r)
    fold_of: dict[str, int] = {}
    for decade in sorted(strata):
        members = sorted(strata[decade], key=lambda r: r.subject_id)
        for i, r in enumerate(members):
            fold_of[r.subject_id] = i % k
    return FoldAssignment(k=k, fold_of=fold_of)


# ---------------------------------------------------------------------------
# Design-matrix construction per feature configuration
# ---------------------------------------------------------------------------


def subject_design_rows(subject: SubjectData, config: FeatureConfig) -> np.ndarray:
    """Segment-level feature rows for one subject under one configuration.

    Raises if the subject contributes zero rows (the caller reports it).
    """
    name = config.name
    demog = subject.record.demographics()
    if name in ("hr_only", "hr_hrv", "hr_hrv_demog"):
        hrv = subject.hrv_rows
        if hrv.shape[0] == 0:
            raise PpgBenchError(
                f"subject {subject.record.subject_id}: zero valid segments"
            )
        if name == "hr_only":
            return hrv[:, :1]
        if name == "hr_hrv":
            return hrv
        return np.hstack([hrv, np.tile(demog, (hrv.shape[0], 1))])
    if name in ("demog_only", "sex_only"):
        n = max(subject.n_selected - subject.n_dropped, 1)
        cols = demog if name == "demog_only" else demog[:1]
        return np.tile(cols, (n, 1))
    if name in ("ppg_only", "ppg_demog"):
        emb = subject.embeddings.get(config.embedding_model)
        if emb is None:
            raise PpgBenchError(
                f"subject {subject.record.subject_id}: no embeddings for "
                f"model {config.embedding_model!r}"
            )
        if emb.shape[0] == 0:
            raise PpgBenchError(
                f"subject {subject.record.subject_id}: zero valid segments"
            )
        if name == "ppg_only":
            return emb
        return np.hstack([emb, np.tile(demog, (emb.shape[0], 1))])
    raise ValueError(f"no design rows for config {name!r}")


def _stack_design(subjects: list[SubjectData], config: FeatureConfig):
    """Stacked (X, y, row_slices) for a subject list."""
    blocks, targets, slices = [], [], []
    start = 0
    for s in subjects:
        rows = subject_design_rows(s, config)
        blocks.append(rows)
        targets.append(np.full(rows.shape[0], s.record.age_years))
        slices.append((start, start + rows.shape[0]))
        start += rows.shape[0]
    return np.vstack(blocks), np.concatenate(targets), slices


def _fit_and_predict_fold(
    train: list[SubjectData],
    test: list[SubjectData],
    config: FeatureConfig,
    grid: tuple[float, ...],
):
    """Fit on training segment rows, return per-test-subject mean
    predictions and the selected alpha."""
    if config.name == "baseline":
        y_train = np.concatenate(
            [np.full(max(s.n_selected - s.n_dropped, 1), s.record.age_years) for s in train]
        )
        predictor = baseline_fit(y_train)
        preds = {s.record.subject_id: predictor.mean for s in test}
        return preds, None
    X_train, y_train, _ = _stack_design(train, config)
    ridge = fit_with_alpha_selection(X_train, y_train, grid)
    preds = {}
    for s in test:
        rows = subject_design_rows(s, config)
        preds[s.record.subject_id] = float(np.mean(ridge.predict(rows)))
    return preds, ridge.alpha


def run_cv(
    config: FeatureConfig,
    cohort: Cohort,
    k: int = 5,
    grid: tuple[float, ...] = ALPHA_GRID,
) -> EvalReport:
    """Subject-stratified k-fold cross-validation for one configuration."""
    assignment = assign_stratified_folds(cohort.subjects, k)
    by_id = cohort.by_id()

    def run_fold(fold: int):
        test_ids = set(assignment.subjects_in(fold))
        train_ids = set(assignment.fold_of) - test_ids
        if train_ids & test_ids:
            raise LeakageError(f"fold {fold}: overlapping train/test subjects")
        train = [by_id[s] for s in sorted(train_ids)]
        test = [by_id[s] for s in sorted(test_ids)]
        preds, alpha = _fit_and_predict_fold(train, test, config, grid)
        errors = [abs(preds[s.record.subject_id] - s.record.age_years) for s in test]
        return FoldResult(
            fold=fold,
            n_train_subjects=len(train),
            n_test_subjects=len(test),
            alpha=alpha,
            mae=float(np.mean(errors)),
        ), preds

    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_fold, range(k)))
    else:
        outcomes = [run_fold(f) for f in range(k)]

    predictions: list[SubjectPrediction] = []
    fold_results = []
    for fold, (result, preds) in enumerate(outcomes):
        fold_results.append(result)
        for sid, pred in sorted(preds.items()):
            predictions.append(
                SubjectPrediction(
                    subject_id=sid,
                    age_years=by_id[sid].record.age_years,
                    prediction=pred,
                    fold=fold,
                )
            )
    if len(predictions) != len(cohort.subjects):
        raise LeakageError("every subject must be predicted exactly once")

    ages = np.array([p.age_years for p in predictions])
    preds = np.array([p.prediction for p in predictions])
    report = EvalReport(
        config=config.name,
        embedding_model=config.embedding_model,
        k=k,
        predictions=predictions,
        fold_results=fold_results,
        pooled_mae=float(np.mean(np.abs(preds - ages))),
        fold_mae_sd=float(np.std([f.mae for f in fold_results])),
        pooled_r2=pooled_r2(preds, ages),
        pooled_r=pooled_pearson(preds, ages),
        dropped_segments=cohort.total_dropped_segments,
    )
    table, exclusions = decade_breakdown(report)
    report.decade_table = table
    report.decade_exclusions = exclusions
    return report


def pooled_r2(preds: np.ndarray, ages: np.ndarray) -> float:
    ss_res = float(np.sum((preds - ages) ** 2))
    ss_tot = float(np.sum((ages - np.mean(ages)) ** 2))
    return 1.0 - ss_res / ss_tot


def pooled_pearson(preds: np.ndarray, ages: np.ndarray) -> float:
    pd = preds - preds.mean()
    ad = ages - ages.mean()
    denom = float(np.sqrt(np.sum(pd**2) * np.sum(ad**2)))
    if denom == 0.0:
        return float("nan")
    return float(np.dot(pd, ad) / denom)


def decade_breakdown(report: EvalReport) -> tuple[list[dict], int]:
    """Per-age-bin subject counts and MAEs; subjects outside [20, 100) are
    excluded from the table and counted."""
    table = []
    excluded = 0
    for p in report.predictions:
        if not (DECADE_BINS[0][0] <= p.age_years < DECADE_BINS[-1][1]):
            excluded += 1
    for lo, hi in DECADE_BINS:
        members = [p for p in report.predictions if lo <= p.age_years < hi]
        mae = (
            float(np.mean([abs(p.prediction - p.age_years) for p in members]))
            if members
            else None
        )
        table.append({"bin": f"{lo}-{hi}", "lo": lo, "hi": hi, "n": len(members), "mae": mae})
    return table, excluded


def learning_curve(
    config: FeatureConfig,
    cohort: Cohort,
    sizes=DEFAULT_LEARNING_SIZES,
    seed: int = 0,
    k: int = 5,
    grid: tuple[float, ...] = ALPHA_GRID,
) -> list[dict]:
    """Mean test-fold MAE as a function of training-subject count.

    For each fold the training subjects are shuffled with a per-fold
    deterministic stream derived from the seed; the first n are used.  The
    sentinel "all" uses every training subject.  Oversized entries are
    skipped with a notice entry.
    """
    assignment = assign_stratified_folds(cohort.subjects, k)
    by_id = cohort.by_id()
    folds = []
    for fold in range(k):
        test_ids = set(assignment.subjects_in(fold))
        train_ids = sorted(set(assignment.fold_of) - test_ids)
        rng = Xoshiro256StarStar(mix_seed(seed, fold))
        rng.shuffle(train_ids)
        folds.append((train_ids, sorted(test_ids)))
    min_train = min(len(t) for t, _ in folds)
    results = []
    for size in sizes:
        if size == "all":
            n = None
        else:
            n = int(size)
            if n < 2:
                raise ValueError("training size must be >= 2")
            if n > min_train:
                results.append({"n_train": n, "mae": None, "skipped": True})
                continue
        maes = []
        for train_ids, test_ids in folds:
            chosen = train_ids if n is None else train_ids[:n]
            train = [by_id[s] for s in chosen]
            test = [by_id[s] for s in test_ids]
            preds, _ = _fit_and_predict_fold(train, test, config, grid)
            maes.append(
                float(
                    np.mean(
                        [abs(preds[s.record.subject_id] - s.record.age_years) for s in test]
                    )
                )
            )
        results.append(
            {
                "n_train": min_train if n is None else n,
                "mae": float(np.mean(maes)),
                "skipped": False,
            }
        )
    return results


def evaluate_external_predictions(
    preds_by_subject: dict[str, list[float]],
    subjects,
) -> EvalReport:
    """Zero-shot evaluation of an external per-segment prediction file.

    Segment predictions are averaged per subject; metrics are pooled; the
    diagnostics record the prediction range and its ratio to the true age
    range (a range-collapse indicator).
    """
    records = [getattr(s, "record", s) for s in subjects]
    known = {r.subject_id for r in records}
    unknown = sorted(set(preds_by_subject) - known)
    if unknown:
        raise PpgBenchError(f"predictions for unknown subjects: {', '.join(unknown)}")
    missing = sorted(known - set(preds_by_subject))
    if missing:
        raise PpgBenchError(f"missing predictions for subjects: {', '.join(missing)}")
    predictions = []
    for r in sorted(records, key=lambda r: r.subject_id):
        per_segment = preds_by_subject[r.subject_id]
        if not per_segment:
            raise PpgBenchError(f"subject {r.subject_id}: empty prediction list")
        predictions.append(
            SubjectPrediction(
                subject_id=r.subject_id,
                age_years=r.age_years,
                prediction=float(np.mean(per_segment)),
                fold=0,
            )
        )
    ages = np.array([p.age_years for p in predictions])
    preds = np.array([p.prediction for p in predictions])
    pred_range = float(preds.max() - preds.min())
    age_range = float(ages.max() - ages.min())
    report = EvalReport(
        config="zero_shot",
        embedding_model=None,
        k=0,
        predictions=predictions,
        fold_results=[],
        pooled_mae=float(np.mean(np.abs(preds - ages))),
        fold_mae_sd=0.0,
        pooled_r2=pooled_r2(preds, ages),
        pooled_r=pooled_pearson(preds, ages),
        dropped_segments=0,
        diagnostics={
            "prediction_min": float(preds.min()),
            "prediction_max": float(preds.max()),
            "range_ratio": pred_range / age_range if age_range > 0 else float("nan"),
        },
    )
    table, exclusions = decade_breakdown(report)
    report.decade_table = table
    report.decade_exclusions = exclusions
    return report
