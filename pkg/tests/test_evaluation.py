import numpy as np
import pytest

from ppgbench.dataset import Cohort, SubjectData, SubjectRecord
from ppgbench.errors import LeakageError, PpgBenchError
from ppgbench.evaluation import (
    EvalReport,
    FeatureConfig,
    assign_stratified_folds,
    decade_breakdown,
    evaluate_external_predictions,
    learning_curve,
    run_cv,
)


def make_record(sid, age, sbp=120.0, dbp=80.0, bmi=24.0, height=170.0, weight=70.0, sex="M"):
    return SubjectRecord(
        subject_id=sid,
        age_years=age,
        sex=sex,
        height_cm=height,
        weight_kg=weight,
        bmi_kg_m2=bmi,
        sbp_mmhg=sbp,
        dbp_mmhg=dbp,
    )


def make_cohort(n=30, seed=0, segments=4, age_signal=True, emb_dim=5):
    """Fabricated cohort: hrv rows and embeddings with optional age signal."""
    rng = np.random.default_rng(seed)
    subjects = []
    for i in range(n):
        age = float(rng.uniform(20, 90))
        hrv = rng.normal(size=(segments, 7))
        if age_signal:
            hrv[:, 0] = 100.0 - 0.5 * age + rng.normal(0, 2, size=segments)
        emb = rng.normal(size=(segments, emb_dim))
        if age_signal:
            emb[:, 0] = age + rng.normal(0, 5, size=segments)
        sbp = 100.0 + (0.5 * age if age_signal else 0.0) + rng.normal(0, 5)
        subjects.append(
            SubjectData(
                record=make_record(f"S{i:03d}", age, sbp=sbp),
                n_selected=segments,
                hrv_rows=hrv,
                hrv_segment_indices=list(range(segments)),
                n_dropped=0,
                embeddings={"m": emb},
            )
        )
    return Cohort(subjects=subjects)


class TestFeatureConfig:
    def test_ppg_requires_model(self):
        with pytest.raises(ValueError):
            FeatureConfig(name="ppg_only")

    def test_non_ppg_forbids_model(self):
        with pytest.raises(ValueError):
            FeatureConfig(name="hr_only", embedding_model="m")

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            FeatureConfig(name="nope")


class TestAssignStratifiedFolds:
    def test_two_decades_balanced(self):
        records = [make_record(f"A{i}", 35.0) for i in range(5)]
        records += [make_record(f"B{i}", 65.0) for i in range(5)]
        assignment = assign_stratified_folds(records, k=5)
        for fold in range(5):
            members = assignment.subjects_in(fold)
            assert len(members) == 2
            assert any(m.startswith("A") for m in members)
            assert any(m.startswith("B") for m in members)

    def test_occupancy_spread_and_uniqueness(self):
        rng = np.random.default_rng(50)
        for _ in range(20):
            n = int(rng.integers(10, 80))
            records = [
                make_record(f"S{i:03d}", float(rng.uniform(18, 95))) for i in range(n)
            ]
            assignment = assign_stratified_folds(records, k=5)
            assert len(assignment.fold_of) == n
            strata = {}
            for r in records:
                strata.setdefault(int(r.age_years // 10), []).append(r.subject_id)
            for members in strata.values():
                counts = np.bincount([assignment.fold_of[m] for m in members], minlength=5)
                assert counts.max() - counts.min() <= 1

    def test_order_independence(self):
        rng = np.random.default_rng(51)
        records = [make_record(f"S{i:03d}", float(rng.uniform(18, 95))) for i in range(40)]
        base = assign_stratified_folds(records, k=5).fold_of
        for seed in range(10):
            perm = list(records)
            np.random.default_rng(seed).shuffle(perm)
            assert assign_stratified_folds(perm, k=5).fold_of == base

    def test_duplicate_ids_rejected(self):
        records = [make_record("X", 40.0), make_record("X", 60.0)] + [
            make_record(f"S{i}", 50.0) for i in range(5)
        ]
        with pytest.raises(LeakageError):
            assign_stratified_folds(records, k=2)

    def test_fewer_subjects_than_folds(self):
        with pytest.raises(ValueError):
            assign_stratified_folds([make_record("A", 50.0)], k=5)


class TestRunCv:
    def test_affine_demographic_target(self):
        # age is an exact affine function of sbp
        rng = np.random.default_rng(52)
        subjects = []
        for i in range(40):
            age = float(rng.uniform(20, 90))
            sbp = 60.0 + 1.0 * age
            subjects.append(
                SubjectData(
                    record=make_record(f"S{i:03d}", age, sbp=sbp),
                    n_selected=3,
                    hrv_rows=rng.normal(size=(3, 7)),
                    hrv_segment_indices=[0, 1, 2],
                    n_dropped=0,
                )
            )
        report = run_cv(FeatureConfig("demog_only"), Cohort(subjects=subjects), k=5)
        assert report.pooled_mae < 0.5
        assert report.pooled_r2 > 0.99

    def test_pure_noise_r2_near_zero(self):
        bad = 0
        for seed in range(20):
            cohort = make_cohort(n=40, seed=seed, age_signal=False)
            report = run_cv(FeatureConfig("hr_hrv"), cohort, k=5)
            if report.pooled_r2 > 0.05:
                bad += 1
        assert bad == 0

    def test_every_subject_predicted_once(self):
        cohort = make_cohort(n=25, seed=1)
        report = run_cv(FeatureConfig("hr_hrv"), cohort, k=5)
        sids = [p.subject_id for p in report.predictions]
        assert sorted(sids) == sorted(s.record.subject_id for s in cohort.subjects)
        assert len(set(sids)) == len(sids)

    def test_pooled_mae_definition(self):
        cohort = make_cohort(n=25, seed=2)
        report = run_cv(FeatureConfig("ppg_only", embedding_model="m"), cohort, k=5)
        errors = [abs(p.prediction - p.age_years) for p in report.predictions]
        assert report.pooled_mae == pytest.approx(float(np.mean(errors)), rel=1e-12)

    def test_baseline_config(self):
        cohort = make_cohort(n=20, seed=3)
        report = run_cv(FeatureConfig("baseline"), cohort, k=4)
        # constant within a fold
        by_fold = {}
        for p in report.predictions:
            by_fold.setdefault(p.fold, set()).add(round(p.prediction, 9))
        assert all(len(v) == 1 for v in by_fold.values())

    def test_determinism_and_thread_counts(self, monkeypatch):
        cohort = make_cohort(n=30, seed=4)
        config = FeatureConfig("ppg_demog", embedding_model="m")
        monkeypatch.setenv("PPGBENCH_THREADS", "1")
        a = run_cv(config, cohort, k=5).to_json()
        b = run_cv(config, cohort, k=5).to_json()
        monkeypatch.setenv("PPGBENCH_THREADS", "8")
        c = run_cv(config, cohort, k=5).to_json()
        assert a == b == c

    def test_subject_aggregation_order_independent(self):
        cohort = make_cohort(n=20, seed=5)
        report = run_cv(FeatureConfig("ppg_only", embedding_model="m"), cohort, k=4)
        for s in cohort.subjects:
            s.embeddings["m"] = s.embeddings["m"][::-1].copy()
        permuted = run_cv(FeatureConfig("ppg_only", embedding_model="m"), cohort, k=4)
        for p, q in zip(
            sorted(report.predictions, key=lambda p: p.subject_id),
            sorted(permuted.predictions, key=lambda p: p.subject_id),
        ):
            assert abs(p.prediction - q.prediction) < 1e-12

    def test_missing_embeddings_error(self):
        cohort = make_cohort(n=10, seed=6)
        for s in cohort.subjects:
            s.embeddings = {}
        with pytest.raises(PpgBenchError):
            run_cv(FeatureConfig("ppg_only", embedding_model="m"), cohort, k=2)


class TestDecadeBreakdown:
    def _report(self, entries):
        from ppgbench.evaluation import SubjectPrediction

        preds = [
            SubjectPrediction(subject_id=f"S{i}", age_years=a, prediction=p, fold=0)
            for i, (a, p) in enumerate(entries)
        ]
        return EvalReport(
            config="demog_only",
            embedding_model=None,
            k=5,
            predictions=preds,
            fold_results=[],
            pooled_mae=float(np.mean([abs(p - a) for a, p in entries])),
            fold_mae_sd=0.0,
            pooled_r2=0.0,
            pooled_r=0.0,
            dropped_segments=0,
        )

    def test_young_subject_excluded(self):
        report = self._report([(19.0, 30.0), (45.0, 50.0)])
        table, excluded = decade_breakdown(report)
        assert excluded == 1
        assert sum(row["n"] for row in table) == 1

    def test_single_bin_matches_pooled(self):
        entries = [(55.0 + i, 50.0 + i) for i in range(5)]
        report = self._report(entries)
        table, _ = decade_breakdown(report)
        row = next(r for r in table if r["bin"] == "50-60")
        assert row["n"] == 5
        assert row["mae"] == pytest.approx(report.pooled_mae, rel=1e-12)

    def test_weighted_mean_identity(self):
        rng = np.random.default_rng(53)
        entries = [
            (float(rng.uniform(20, 99)), float(rng.uniform(20, 99))) for _ in range(60)
        ]
        report = self._report(entries)
        table, _ = decade_breakdown(report)
        total_n = sum(r["n"] for r in table)
        weighted = sum(r["n"] * r["mae"] for r in table if r["mae"] is not None) / total_n
        binned = [(a, p) for a, p in entries if 20 <= a < 100]
        assert weighted == pytest.approx(
            float(np.mean([abs(p - a) for a, p in binned])), abs=1e-9
        )


class TestLearningCurve:
    def test_full_size_matches_run_cv(self):
        cohort = make_cohort(n=30, seed=7)
        config = FeatureConfig("hr_hrv")
        report = run_cv(config, cohort, k=5)
        curve = learning_curve(config, cohort, sizes=("all",), seed=3, k=5)
        fold_mean = float(np.mean([f.mae for f in report.fold_results]))
        assert curve[-1]["mae"] == pytest.approx(fold_mean, abs=1e-9)

    def test_same_seed_identical(self):
        cohort = make_cohort(n=30, seed=8)
        config = FeatureConfig("ppg_only", embedding_model="m")
        a = learning_curve(config, cohort, sizes=(5, 10, "all"), seed=11, k=5)
        b = learning_curve(config, cohort, sizes=(5, 10, "all"), seed=11, k=5)
        assert a == b

    def test_learnable_cohort_non_increasing(self):
        from scipy.stats import spearmanr

        cohort = make_cohort(n=60, seed=9)
        config = FeatureConfig("ppg_only", embedding_model="m")
        curve = learning_curve(config, cohort, sizes=(5, 10, 20, 40, "all"), seed=4, k=5)
        ns = [r["n_train"] for r in curve if not r["skipped"]]
        maes = [r["mae"] for r in curve if not r["skipped"]]
        rho = spearmanr(ns, maes).statistic
        assert rho <= 0

    def test_oversized_skipped(self):
        cohort = make_cohort(n=20, seed=10)
        curve = learning_curve(FeatureConfig("hr_hrv"), cohort, sizes=(5, 1000), seed=1, k=4)
        assert curve[0]["skipped"] is False
        assert curve[1]["skipped"] is True
        assert curve[1]["mae"] is None


class TestExternalPredictions:
    def _subjects(self, ages):
        return [make_record(f"S{i}", a) for i, a in enumerate(ages)]

    def test_perfect_predictions(self):
        ages = [30.0, 50.0, 70.0]
        preds = {f"S{i}": [a] for i, a in enumerate(ages)}
        report = evaluate_external_predictions(preds, self._subjects(ages))
        assert report.pooled_mae == 0.0
        assert report.diagnostics["range_ratio"] == pytest.approx(1.0)

    def test_constant_predictions(self):
        ages = [30.0, 50.0, 70.0, 90.0]
        preds = {f"S{i}": [55.0, 55.0] for i in range(4)}
        report = evaluate_external_predictions(preds, self._subjects(ages))
        assert report.pooled_r2 <= 0.0
        assert report.diagnostics["range_ratio"] == 0.0

    def test_segment_averaging(self):
        ages = [40.0, 60.0, 80.0]
        preds = {"S0": [35.0, 45.0], "S1": [60.0], "S2": [70.0, 90.0, 80.0]}
        report = evaluate_external_predictions(preds, self._subjects(ages))
        by_id = {p.subject_id: p.prediction for p in report.predictions}
        assert by_id == {"S0": 40.0, "S1": 60.0, "S2": 80.0}

    def test_missing_subject_errors(self):
        ages = [40.0, 60.0]
        with pytest.raises(PpgBenchError, match="missing"):
            evaluate_external_predictions({"S0": [40.0]}, self._subjects(ages))

    def test_unknown_subject_errors(self):
        with pytest.raises(PpgBenchError, match="unknown"):
            evaluate_external_predictions(
                {"S0": [40.0], "ZZ": [1.0]}, self._subjects([40.0])
            )

    def test_range_collapse_diagnostic(self):
        rng = np.random.default_rng(54)
        ages = list(rng.uniform(20, 92, size=50))
        preds = {f"S{i}": [float(rng.uniform(38, 67))] for i in range(50)}
        report = evaluate_external_predictions(preds, self._subjects(ages))
        assert report.diagnostics["prediction_min"] >= 38.0
        assert report.diagnostics["prediction_max"] <= 67.0
        assert report.diagnostics["range_ratio"] < 0.6
