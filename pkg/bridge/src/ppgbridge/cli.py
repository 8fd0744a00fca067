"""Command-line surface: embed, age, convert.

`embed` and `age` walk a directory of .ppgs stores and emit one
`<subject>.<model>.ppge` per store; `age` additionally writes the
zero-shot prediction CSV and a skip list of segments without extractable
beats.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from . import convert, formats, models


def _ppgs_files(data_dir: Path) -> list[Path]:
    stores = sorted(data_dir.glob("*.ppgs"))
    if not stores:
        raise formats.BridgeFormatError(f"no .ppgs stores in {data_dir}")
    return stores


def cmd_embed(args) -> None:
    spec = models.MODEL_SPECS[args.model]
    model = models.load_torchscript(args.weights)
    data_dir = Path(args.in_dir)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for path in _ppgs_files(data_dir):
        store = formats.read_ppgs(path)
        vectors = models.embed_segments(model, store.segments, store.fs_hz, spec)
        subject = path.name.split(".")[0]
        formats.write_ppge(out_dir / f"{subject}.{spec.name}.ppge", vectors)
    print(f"embedded {len(_ppgs_files(data_dir))} stores with {spec.name}")


def cmd_age(args) -> None:
    model = models.load_torchscript(args.weights)
    data_dir = Path(args.in_dir)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    pred_rows = []
    skip_rows = []
    n_stores = 0
    for path in _ppgs_files(data_dir):
        store = formats.read_ppgs(path)
        subject = path.name.split(".")[0]
        preds, acts, skipped = models.age_model_outputs(
            model, store.segments, store.fs_hz
        )
        if acts.shape[0]:
            formats.write_ppge(out_dir / f"{subject}.{models.AGE_MODEL}.ppge", acts)
        kept = [i for i in range(store.segments.shape[0]) if i not in set(skipped)]
        for position, pred in zip(kept, preds):
            pred_rows.append((subject, position, float(pred)))
        for position in skipped:
            skip_rows.append((subject, position))
        n_stores += 1

    pred_buf = io.StringIO()
    writer = csv.writer(pred_buf, lineterminator="\n")
    writer.writerow(["subject_id", "segment_index", "predicted_age_years"])
    for subject, position, pred in pred_rows:
        writer.writerow([subject, position, repr(pred)])
    formats.atomic_write_bytes(
        out_dir / "zero_shot_predictions.csv", pred_buf.getvalue().encode("utf-8")
    )

    skip_buf = io.StringIO()
    writer = csv.writer(skip_buf, lineterminator="\n")
    writer.writerow(["subject_id", "segment_index"])
    for subject, position in skip_rows:
        writer.writerow([subject, position])
    formats.atomic_write_bytes(
        out_dir / "skipped_segments.csv", skip_buf.getvalue().encode("utf-8")
    )
    print(
        f"age model: {n_stores} stores, {len(pred_rows)} predictions, "
        f"{len(skip_rows)} segments skipped"
    )


def cmd_convert(args) -> None:
    result = convert.convert_pulsedb(args.in_dir, args.out)
    print(
        f"converted {result.n_converted} subjects "
        f"({result.n_skipped} files skipped)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppgbridge")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="emit PPGE embeddings for every PPGS store")
    p.add_argument("--weights", required=True)
    p.add_argument("--model", required=True, choices=sorted(models.MODEL_SPECS))
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser(
        "age", help="age-model activations, predictions, and skip list"
    )
    p.add_argument("--weights", required=True)
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_age)

    p = sub.add_parser("convert", help="convert PulseDB HDF5 files to manifest + PPGS")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convert)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (
        formats.BridgeFormatError,
        models.WeightsError,
        NotADirectoryError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
