"""Command-line surface tying the pipeline together.

Subcommands: ingest, synth, features, evaluate, zero-shot, learning-curve,
agegap, report.  Every subcommand exits nonzero with a one-line diagnostic on
any module error and removes partial output files.  Internal parallelism is
capped by the PPGBENCH_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import shutil
import sys
from pathlib import Path

import numpy as np

from . import dataset, evaluation, stats, synth
from .errors import PpgBenchError
from .evaluation import FeatureConfig
from .synth import SYNTH_EMBEDDING_MODEL, SynthSpec


def _reg(args, path: Path) -> Path:
    """Record an output path for cleanup if the command later fails."""
    registry = getattr(args, "_registry", None)
    if registry is not None:
        registry.append(path)
    return path


def _write_report(report: evaluation.EvalReport, path: Path) -> None:
    path.write_text(report.to_json() + "\n", encoding="utf-8")


def _write_predictions_csv(report_dict: dict, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "age_years", "prediction", "fold"])
        for row in report_dict["predictions"]:
            writer.writerow(
                [row["subject_id"], repr(row["age_years"]), repr(row["prediction"]), row["fold"]]
            )


def _write_decade_csv(report_dict: dict, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["age_bin", "n", "mae"])
        for row in report_dict["decade_table"]:
            writer.writerow(
                [row["bin"], row["n"], "" if row["mae"] is None else repr(row["mae"])]
            )
        writer.writerow(["excluded_subjects", report_dict["decade_exclusions"], ""])


def _embedding_models_arg(args) -> list[str]:
    return [args.embeddings] if getattr(args, "embeddings", None) else []


def cmd_ingest(args) -> list[Path]:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    records, excluded = dataset.load_manifest(args.manifest)
    manifest_dir = Path(args.manifest).parent
    written: list[Path] = []
    out_records = []
    for rec in records:
        if rec.age_years < args.min_age:
            excluded += 1
            continue
        store = dataset.read_segment_store(manifest_dir / rec.segment_file)
        selected = dataset.select_even_indices(store.segments.shape[0], args.max_segments)
        capped = dataset.SegmentStore(
            subject_id=rec.subject_id,
            fs_hz=store.fs_hz,
            segments=store.segments[selected],
        )
        path = _reg(args, out_dir / f"{rec.subject_id}.ppgs")
        dataset.write_segment_store(capped, path)
        written.append(path)
        out_records.append(
            dataset.SubjectRecord(
                **{**rec.__dict__, "segment_file": f"{rec.subject_id}.ppgs"}
            )
        )
    manifest_out = _reg(args, out_dir / "manifest.csv")
    dataset.write_manifest(out_records, manifest_out)
    written.append(manifest_out)
    print(f"ingested {len(out_records)} subjects ({excluded} excluded by age)")
    return written


def cmd_synth(args) -> list[Path]:
    spec = SynthSpec(n_subjects=args.subjects, seed=args.seed)
    _reg(args, Path(args.out))
    records = synth.synth_population(spec, args.out)
    print(f"wrote synthetic population of {len(records)} subjects to {args.out}")
    return [Path(args.out)]


def cmd_features(args) -> list[Path]:
    out = _reg(args, Path(args.out))
    cohort = dataset.load_cohort(args.data)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "segment_position", *dataset_feature_names()])
        for subject in cohort.subjects:
            for pos, row in zip(subject.hrv_segment_indices, subject.hrv_rows):
                writer.writerow(
                    [subject.record.subject_id, pos, *[repr(float(v)) for v in row]]
                )
    dropped = cohort.total_dropped_segments
    print(f"wrote features for {len(cohort.subjects)} subjects; dropped segments: {dropped}")
    return [out]


def dataset_feature_names():
    from .features import FEATURE_NAMES

    return FEATURE_NAMES


def cmd_evaluate(args) -> list[Path]:
    config = FeatureConfig(name=args.config, embedding_model=args.embeddings)
    cohort = dataset.load_cohort(args.data, embedding_models=_embedding_models_arg(args))
    report = evaluation.run_cv(config, cohort, k=args.folds)
    out = _reg(args, Path(args.out))
    _write_report(report, out)
    d = report.to_dict()
    _write_predictions_csv(d, _reg(args, out.with_suffix(".predictions.csv")))
    _write_decade_csv(d, _reg(args, out.with_suffix(".decades.csv")))
    print(
        f"config={report.config} pooled MAE={report.pooled_mae:.3f} "
        f"R2={report.pooled_r2:.3f} r={report.pooled_r:.3f}"
    )
    return [out, out.with_suffix(".predictions.csv"), out.with_suffix(".decades.csv")]


def cmd_zero_shot(args) -> list[Path]:
    records, _ = dataset.load_manifest(Path(args.data) / "manifest.csv")
    preds = dataset.load_external_predictions(args.predictions)
    report = evaluation.evaluate_external_predictions(preds, records)
    out = _reg(args, Path(args.out))
    _write_report(report, out)
    d = report.to_dict()
    _write_predictions_csv(d, _reg(args, out.with_suffix(".predictions.csv")))
    diag = report.diagnostics
    print(
        f"zero-shot MAE={report.pooled_mae:.3f} r={report.pooled_r:.3f} "
        f"prediction range [{diag['prediction_min']:.1f}, {diag['prediction_max']:.1f}] "
        f"range ratio {diag['range_ratio']:.3f}"
    )
    return [out, out.with_suffix(".predictions.csv")]


def cmd_learning_curve(args) -> list[Path]:
    config = FeatureConfig(name=args.config, embedding_model=args.embeddings)
    cohort = dataset.load_cohort(args.data, embedding_models=_embedding_models_arg(args))
    sizes = [s if s == "all" else int(s) for s in args.sizes.split(",")]
    curve = evaluation.learning_curve(config, cohort, sizes=sizes, seed=args.seed, k=args.folds)
    out = _reg(args, Path(args.out))
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_train", "mae", "skipped"])
        for row in curve:
            writer.writerow(
                [
                    row["n_train"],
                    "" if row["mae"] is None else repr(row["mae"]),
                    int(row["skipped"]),
                ]
            )
    print(f"wrote learning curve with {len(curve)} entries")
    return [out]


def cmd_agegap(args) -> list[Path]:
    report_dict = json.loads(Path(args.report).read_text(encoding="utf-8"))
    records, _ = dataset.load_manifest(Path(args.data) / "manifest.csv")
    by_id = {r.subject_id: r for r in records}
    rows = report_dict["predictions"]
    missing = [r["subject_id"] for r in rows if r["subject_id"] not in by_id]
    if missing:
        raise PpgBenchError(f"report subjects missing from manifest: {missing[:3]}")
    ages = np.array([r["age_years"] for r in rows])
    preds = np.array([r["prediction"] for r in rows])
    gaps = stats.age_gap(preds, ages)
    marker_values = {
        "sbp": np.array([by_id[r["subject_id"]].sbp_mmhg for r in rows]),
        "dbp": np.array([by_id[r["subject_id"]].dbp_mmhg for r in rows]),
        "bmi": np.array([by_id[r["subject_id"]].bmi_kg_m2 for r in rows]),
    }
    wanted = [m.strip() for m in args.markers.split(",") if m.strip()]
    unknown = [m for m in wanted if m not in marker_values]
    if unknown:
        raise PpgBenchError(f"unknown markers: {', '.join(unknown)}")
    result = stats.age_gap_associations(
        gaps, ages, {m: marker_values[m] for m in wanted}
    )
    out = _reg(args, Path(args.out))
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["marker", "raw_r", "raw_p", "partial_r", "partial_p", "n", "bonferroni_threshold"]
        )
        for row in result.rows:
            writer.writerow(
                [
                    row.marker,
                    repr(row.raw_r),
                    repr(row.raw_p),
                    repr(row.partial_r),
                    repr(row.partial_p),
                    row.n,
                    repr(result.bonferroni_threshold),
                ]
            )
    # per-subject values backing the age-gap scatter plots
    values_out = _reg(args, out.with_suffix(".values.csv"))
    with open(values_out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "age_years", "age_gap", *wanted])
        for i, r in enumerate(rows):
            writer.writerow(
                [
                    r["subject_id"],
                    repr(float(ages[i])),
                    repr(float(gaps[i])),
                    *[repr(float(marker_values[m][i])) for m in wanted],
                ]
            )
    for row in result.rows:
        print(
            f"{row.marker}: raw r={row.raw_r:+.3f} (p={row.raw_p:.3g}), "
            f"partial r={row.partial_r:+.3f} (p={row.partial_p:.3g})"
        )
    return [out, values_out]


def cmd_report(args) -> list[Path]:
    from .svgplot import SvgPlot

    report_dict = json.loads(Path(args.in_path).read_text(encoding="utf-8"))
    plots_dir = Path(args.plots)
    plots_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    rows = report_dict["predictions"]
    ages = [r["age_years"] for r in rows]
    preds = [r["prediction"] for r in rows]
    scatter = SvgPlot(
        title=f"Predicted vs chronological age ({report_dict['config']})",
        xlabel="Chronological age (years)",
        ylabel="Predicted age (years)",
    )
    lo, hi = min(ages + preds), max(ages + preds)
    scatter.line([lo, hi], [lo, hi], color="#888888")
    scatter.scatter(ages, preds)
    scatter.annotate(f"MAE = {report_dict['pooled_mae']}")
    scatter_path = _reg(args, plots_dir / "predicted_vs_true.svg")
    scatter.save(scatter_path)
    written.append(scatter_path)
    pred_csv = _reg(args, plots_dir / "predicted_vs_true.csv")
    _write_predictions_csv(report_dict, pred_csv)
    written.append(pred_csv)

    curve = [row for row in report_dict.get("learning_curve", []) if not row.get("skipped")]
    if curve:
        plot = SvgPlot(
            title="Learning curve",
            xlabel="Training subjects",
            ylabel="MAE (years)",
        )
        plot.line([r["n_train"] for r in curve], [r["mae"] for r in curve])
        plot.scatter([r["n_train"] for r in curve], [r["mae"] for r in curve])
        curve_path = _reg(args, plots_dir / "learning_curve.svg")
        plot.save(curve_path)
        written.append(curve_path)
        curve_csv = _reg(args, plots_dir / "learning_curve.csv")
        with open(curve_csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n_train", "mae"])
            for r in curve:
                writer.writerow([r["n_train"], repr(r["mae"])])
        written.append(curve_csv)

    if args.agegap:
        with open(args.agegap, newline="", encoding="utf-8") as fh:
            value_rows = list(csv.DictReader(fh))
        markers = [
            c for c in (value_rows[0].keys() if value_rows else [])
            if c not in ("subject_id", "age_years", "age_gap")
        ]
        for marker in markers:
            plot = SvgPlot(
                title=f"Age gap vs {marker}",
                xlabel=marker,
                ylabel="Age gap (years)",
            )
            plot.scatter(
                [float(r[marker]) for r in value_rows],
                [float(r["age_gap"]) for r in value_rows],
            )
            path = _reg(args, plots_dir / f"age_gap_{marker}.svg")
            plot.save(path)
            written.append(path)
    print(f"wrote {len(written)} plot/table files to {plots_dir}")
    return written


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppgbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a manifest and cap segment stores")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-segments", type=int, default=dataset.DEFAULT_MAX_SEGMENTS)
    p.add_argument("--min-age", type=float, default=dataset.MIN_ADULT_AGE)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic population")
    p.add_argument("--subjects", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="per-segment HR/HRV feature table")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("evaluate", help="cross-validated evaluation of one config")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True, choices=evaluation.CONFIG_NAMES)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("zero-shot", help="evaluate an external prediction CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_zero_shot)

    p = sub.add_parser("learning-curve", help="MAE vs training-set size")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True, choices=evaluation.CONFIG_NAMES)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--sizes", default="20,50,100,200,400,700,all")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_learning_curve)

    p = sub.add_parser("agegap", help="age-gap association statistics")
    p.add_argument("--report", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--markers", default="sbp,dbp,bmi")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_agegap)

    p = sub.add_parser("report", help="render SVG figures and CSV tables")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--plots", required=True)
    p.add_argument("--agegap", default=None, help="optional agegap .values.csv")
    p.set_defaults(func=cmd_report)

    return parser


def _cleanup(paths: list[Path]) -> None:
    for path in paths:
        try:
            if path.is_dir():
                shutil.rmtree(path)
            elif path.exists():
                path.unlink()
        except OSError:
            pass


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    registry: list[Path] = []
    args._registry = registry
    try:
        args.func(args)
    except (PpgBenchError, ValueError, OSError) as exc:
        _cleanup(registry)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
