"""TorchScript model loading and batch inference.

Model weights are distributed as TorchScript archives so no architecture
code lives here.  Expected interfaces:

- embedding encoders (pulse_ppg, papagei_s): ``model(x)`` with ``x`` a
  float32 tensor of shape (batch, input_len), returning (batch, 512);
- age model: ``model(t)`` with ``t`` a float32 tensor of shape
  (batch, 100) holding beat templates, returning the pair
  (predictions (batch,), activations (batch, 192)).

Inference runs single-threaded under no_grad so re-runs are bitwise
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .beats import NoValidBeats, beat_template, resample_spectrum, zscore

EMBEDDING_DIM = 512
AGE_ACTIVATION_DIM = 192
PULSE_PPG_FS = 50.0
PULSE_PPG_LEN = 500


@dataclass(frozen=True)
class ModelSpec:
    name: str
    output_dim: int
    target_fs: float | None  # resample before inference when set


MODEL_SPECS = {
    "pulse_ppg": ModelSpec("pulse_ppg", EMBEDDING_DIM, PULSE_PPG_FS),
    "papagei_s": ModelSpec("papagei_s", EMBEDDING_DIM, None),
}
AGE_MODEL = "age"


class WeightsError(Exception):
    pass


def load_torchscript(path) -> torch.jit.ScriptModule:
    path = Path(path)
    if not path.is_file():
        raise WeightsError(f"weight file not found: {path}")
    torch.set_num_threads(1)
    model = torch.jit.load(str(path), map_location="cpu")
    model.eval()
    return model


def prepare_segments(segments: np.ndarray, fs_hz: float, spec: ModelSpec) -> np.ndarray:
    """Per-segment preprocessing: optional resample to the model's rate,
    then z-score."""
    rows = []
    for seg in np.asarray(segments, dtype=np.float64):
        if spec.target_fs is not None and fs_hz != spec.target_fs:
            target_len = int(round(seg.size * spec.target_fs / fs_hz))
            seg = resample_spectrum(seg, target_len)
        rows.append(zscore(seg))
    return np.stack(rows).astype(np.float32)


def embed_segments(
    model: torch.jit.ScriptModule,
    segments: np.ndarray,
    fs_hz: float,
    spec: ModelSpec,
    batch_size: int = 64,
) -> np.ndarray:
    """Frozen forward pass over all segments; returns (n, 512) float32."""
    prepared = prepare_segments(segments, fs_hz, spec)
    outputs = []
    with torch.no_grad():
        for start in range(0, prepared.shape[0], batch_size):
            batch = torch.from_numpy(prepared[start : start + batch_size])
            try:
                out = model(batch)
            except RuntimeError as exc:
                raise WeightsError(
                    f"{spec.name}: forward pass failed "
                    f"(wrong weights archive for this model?): {exc}"
                ) from exc
            if not isinstance(out, torch.Tensor):
                raise WeightsError(
                    f"{spec.name}: model returned {type(out).__name__}, "
                    "expected a single embedding tensor"
                )
            outputs.append(out.detach().cpu().numpy())
    vectors = np.concatenate(outputs, axis=0).astype(np.float32)
    if vectors.ndim != 2 or vectors.shape[1] != spec.output_dim:
        raise WeightsError(
            f"{spec.name}: model emitted shape {vectors.shape}, "
            f"expected (n, {spec.output_dim})"
        )
    return vectors


def age_model_outputs(
    model: torch.jit.ScriptModule, segments: np.ndarray, fs_hz: float
) -> tuple[np.ndarray, np.ndarray, list[int]]:
    """Per-segment age predictions and pre-dense activations.

    Returns (predictions, activations, skipped) where ``skipped`` lists
    segment positions without extractable beats; those positions have no
    row in either output array.
    """
    templates = []
    skipped: list[int] = []
    for position, seg in enumerate(np.asarray(segments, dtype=np.float64)):
        try:
            templates.append(beat_template(seg, fs_hz))
        except NoValidBeats:
            skipped.append(position)
    if not templates:
        return (
            np.empty(0, dtype=np.float32),
            np.empty((0, AGE_ACTIVATION_DIM), dtype=np.float32),
            skipped,
        )
    batch = torch.from_numpy(np.stack(templates).astype(np.float32))
    with torch.no_grad():
        preds, acts = model(batch)
    preds = preds.detach().cpu().numpy().reshape(-1).astype(np.float32)
    acts = acts.detach().cpu().numpy().astype(np.float32)
    if acts.ndim != 2 or acts.shape[1] != AGE_ACTIVATION_DIM:
        raise WeightsError(
            f"age model emitted activation shape {acts.shape}, "
            f"expected (n, {AGE_ACTIVATION_DIM})"
        )
    return preds, acts, skipped
