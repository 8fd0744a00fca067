"""Inter-beat intervals and the seven HR/HRV features, with validity rules.

Units: seconds for IBI-domain features, BPM for HR-domain features.  HR
std and SDNN use the population (divisor-N) convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidSegmentError
from .signal import PeakSet

IBI_MIN_S = 0.3
IBI_MAX_S = 2.0
PNN50_THRESHOLD_S = 0.050

MIN_PEAKS = 4
MIN_IBIS = 3

# Worked reference: the IBI sequence {0.8, 0.9, 0.8, 0.9} s with 5 peaks
# yields exactly (IEEE-754 double arithmetic, in FEATURE_NAMES order):
#   hr_mean_bpm    = 70.83333333333334
#   hr_std_bpm     = 4.166666666666664
#   hr_range_bpm   = 8.333333333333329
#   ibi_mean_s     = 0.85
#   sdnn_s         = 0.04999999999999999
#   rmssd_s        = 0.09999999999999998
#   pnn50_fraction = 1.0
HAND_CASE_IBIS = (0.8, 0.9, 0.8, 0.9)
HAND_CASE_VALUES = (
    70.83333333333334,
    4.166666666666664,
    8.333333333333329,
    0.85,
    0.04999999999999999,
    0.09999999999999998,
    1.0,
)

FEATURE_NAMES = (
    "hr_mean_bpm",
    "hr_std_bpm",
    "hr_range_bpm",
    "ibi_mean_s",
    "sdnn_s",
    "rmssd_s",
    "pnn50_fraction",
)


@dataclass(frozen=True)
class IbiSequence:
    """Ordered inter-beat intervals in seconds, already range-filtered."""

    intervals_s: np.ndarray

    def __post_init__(self):
        iv = np.asarray(self.intervals_s, dtype=np.float64)
        object.__setattr__(self, "intervals_s", iv)
        if iv.size and (np.any(iv < IBI_MIN_S) or np.any(iv > IBI_MAX_S)):
            raise ValueError("interval outside the plausible range")

    def __len__(self) -> int:
        return self.intervals_s.size


@dataclass(frozen=True)
class HrvFeatures:
    hr_mean_bpm: float
    hr_std_bpm: float
    hr_range_bpm: float
    ibi_mean_s: float
    sdnn_s: float
    rmssd_s: float
    pnn50_fraction: float

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES])


def peaks_to_ibis(peaks: PeakSet, fs_hz: float) -> IbiSequence:
    """Successive peak gaps in seconds, filtered to [0.3, 2.0] s."""
    idx = peaks.indices
    if idx.size < 2:
        return IbiSequence(intervals_s=np.empty(0))
    intervals = np.diff(idx) / fs_hz
    keep = (intervals >= IBI_MIN_S) & (intervals <= IBI_MAX_S)
    return IbiSequence(intervals_s=intervals[keep])


def hrv_features(ibis: IbiSequence, n_peaks: int) -> HrvFeatures:
    """The seven HR/HRV features of a segment.

    Raises InvalidSegmentError when the segment has fewer than 4 peaks or
    fewer than 3 valid IBIs; the caller drops the segment and reports it.
    """
    if n_peaks < MIN_PEAKS:
        raise InvalidSegmentError(f"only {n_peaks} peaks detected")
    iv = ibis.intervals_s
    if iv.size < MIN_IBIS:
        raise InvalidSegmentError(f"only {iv.size} valid IBIs")
    hr = 60.0 / iv
    diffs = np.diff(iv)
    return HrvFeatures(
        hr_mean_bpm=float(np.mean(hr)),
        hr_std_bpm=float(np.std(hr)),
        hr_range_bpm=float(np.max(hr) - np.min(hr)),
        ibi_mean_s=float(np.mean(iv)),
        sdnn_s=float(np.std(iv)),
        rmssd_s=float(np.sqrt(np.mean(diffs**2))),
        pnn50_fraction=float(np.sum(np.abs(diffs) > PNN50_THRESHOLD_S) / diffs.size),
    )
