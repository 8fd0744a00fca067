import csv
import json

import pytest

from ppgbench.cli import main
from ppgbench.synth import SYNTH_EMBEDDING_MODEL


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "data"
    rc = main(["synth", "--subjects", "24", "--seed", "5", "--out", str(path)])
    assert rc == 0
    return path


class TestSynthCommand:
    def test_writes_expected_files(self, data_dir):
        names = sorted(p.name for p in data_dir.iterdir())
        assert "manifest.csv" in names
        assert sum(n.endswith(".ppgs") for n in names) == 24
        assert sum(n.endswith(".ppge") for n in names) == 24

    def test_rerun_byte_identical(self, data_dir, tmp_path):
        other = tmp_path / "data2"
        assert main(["synth", "--subjects", "24", "--seed", "5", "--out", str(other)]) == 0
        for p in sorted(data_dir.iterdir()):
            assert p.read_bytes() == (other / p.name).read_bytes(), p.name


class TestFeaturesCommand:
    def test_feature_table(self, data_dir, tmp_path):
        out = tmp_path / "features.csv"
        assert main(["features", "--data", str(data_dir), "--out", str(out)]) == 0
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 24 * 8
        assert "hr_mean_bpm" in rows[0]
        assert all(float(r["hr_mean_bpm"]) > 0 for r in rows)


class TestEvaluateCommand:
    def test_round_trip(self, data_dir, tmp_path, capsys):
        out = tmp_path / "report.json"
        rc = main(
            [
                "evaluate",
                "--data",
                str(data_dir),
                "--config",
                "ppg_demog",
                "--embeddings",
                SYNTH_EMBEDDING_MODEL,
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        printed = capsys.readouterr().out
        report = json.loads(out.read_text())
        assert f"MAE={report['pooled_mae']:.3f}" in printed
        assert out.with_suffix(".predictions.csv").exists()
        assert out.with_suffix(".decades.csv").exists()
        with open(out.with_suffix(".predictions.csv"), newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 24
        assert sorted(r["subject_id"] for r in rows) == [
            p["subject_id"] for p in report["predictions"]
        ]

    def test_rerun_byte_identical(self, data_dir, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        argv = ["evaluate", "--data", str(data_dir), "--config", "hr_hrv"]
        assert main(argv + ["--out", str(a)]) == 0
        assert main(argv + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_ppg_without_embeddings_fails(self, data_dir, tmp_path, capsys):
        out = tmp_path / "bad.json"
        rc = main(
            ["evaluate", "--data", str(data_dir), "--config", "ppg_only", "--out", str(out)]
        )
        assert rc == 1
        assert "error:" in capsys.readouterr().err
        assert not out.exists()

    def test_failure_removes_partial_outputs(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        rc = main(
            ["evaluate", "--data", str(tmp_path / "nope"), "--config", "hr_only",
             "--out", str(out)]
        )
        assert rc == 1
        assert not out.exists()
        assert not out.with_suffix(".predictions.csv").exists()


class TestZeroShotCommand:
    def test_external_predictions(self, data_dir, tmp_path, capsys):
        with open(data_dir / "manifest.csv", newline="") as fh:
            manifest = list(csv.DictReader(fh))
        pred_csv = tmp_path / "preds.csv"
        with open(pred_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["subject_id", "segment_index", "predicted_age_years"])
            for row in manifest:
                writer.writerow([row["subject_id"], 0, row["age_years"]])
        out = tmp_path / "zs.json"
        rc = main(
            ["zero-shot", "--data", str(data_dir), "--predictions", str(pred_csv),
             "--out", str(out)]
        )
        assert rc == 0
        report = json.loads(out.read_text())
        assert report["pooled_mae"] == pytest.approx(0.0, abs=1e-9)
        assert "range ratio" in capsys.readouterr().out

    def test_incomplete_predictions_fail(self, data_dir, tmp_path):
        pred_csv = tmp_path / "short.csv"
        pred_csv.write_text("subject_id,segment_index,predicted_age_years\nS0000,0,50.0\n")
        out = tmp_path / "zs.json"
        rc = main(
            ["zero-shot", "--data", str(data_dir), "--predictions", str(pred_csv),
             "--out", str(out)]
        )
        assert rc == 1
        assert not out.exists()


class TestLearningCurveCommand:
    def test_curve_csv(self, data_dir, tmp_path):
        out = tmp_path / "curve.csv"
        rc = main(
            ["learning-curve", "--data", str(data_dir), "--config", "demog_only",
             "--sizes", "5,10,all", "--seed", "3", "--out", str(out)]
        )
        assert rc == 0
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["n_train"] for r in rows[:2]] == ["5", "10"]
        assert int(rows[2]["n_train"]) > 10
        assert all(r["skipped"] == "0" for r in rows)


class TestAgegapAndReport:
    def test_full_pipeline(self, data_dir, tmp_path, capsys):
        report = tmp_path / "report.json"
        assert main(
            ["evaluate", "--data", str(data_dir), "--config", "ppg_demog",
             "--embeddings", SYNTH_EMBEDDING_MODEL, "--out", str(report)]
        ) == 0
        gaps = tmp_path / "agegap.csv"
        rc = main(
            ["agegap", "--report", str(report), "--data", str(data_dir),
             "--out", str(gaps)]
        )
        assert rc == 0
        printed = capsys.readouterr().out
        assert "partial r=" in printed
        with open(gaps, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["marker"] for r in rows] == ["sbp", "dbp", "bmi"]
        values = gaps.with_suffix(".values.csv")
        assert values.exists()

        plots = tmp_path / "plots"
        rc = main(
            ["report", "--in", str(report), "--plots", str(plots),
             "--agegap", str(values)]
        )
        assert rc == 0
        assert (plots / "predicted_vs_true.svg").exists()
        assert (plots / "predicted_vs_true.csv").exists()
        for marker in ("sbp", "dbp", "bmi"):
            assert (plots / f"age_gap_{marker}.svg").exists()

    def test_report_svg_byte_stable(self, data_dir, tmp_path):
        report = tmp_path / "report.json"
        assert main(
            ["evaluate", "--data", str(data_dir), "--config", "demog_only",
             "--out", str(report)]
        ) == 0
        a, b = tmp_path / "p1", tmp_path / "p2"
        assert main(["report", "--in", str(report), "--plots", str(a)]) == 0
        assert main(["report", "--in", str(report), "--plots", str(b)]) == 0
        assert (a / "predicted_vs_true.svg").read_bytes() == (
            b / "predicted_vs_true.svg"
        ).read_bytes()

    def test_unknown_marker_fails(self, data_dir, tmp_path, capsys):
        report = tmp_path / "report.json"
        assert main(
            ["evaluate", "--data", str(data_dir), "--config", "demog_only",
             "--out", str(report)]
        ) == 0
        out = tmp_path / "gaps.csv"
        rc = main(
            ["agegap", "--report", str(report), "--data", str(data_dir),
             "--markers", "sbp,glucose", "--out", str(out)]
        )
        assert rc == 1
        assert "unknown markers" in capsys.readouterr().err
        assert not out.exists()


class TestIngestCommand:
    def test_cap_and_age_filter(self, data_dir, tmp_path):
        out = tmp_path / "ingested"
        rc = main(
            ["ingest", "--manifest", str(data_dir / "manifest.csv"),
             "--out", str(out), "--max-segments", "3", "--min-age", "40"]
        )
        assert rc == 0
        with open(out / "manifest.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert all(float(r["age_years"]) >= 40 for r in rows)
        from ppgbench.dataset import read_segment_store

        for row in rows:
            store = read_segment_store(out / row["segment_file"])
            assert store.segments.shape[0] == 3
