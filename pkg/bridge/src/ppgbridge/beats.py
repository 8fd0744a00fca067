"""Beat segmentation for the age model's template input.

Independent re-implementation of the benchmark's documented algorithm:
z-score the segment, find systolic peaks (topographic prominence >= 0.1
SD, minimum spacing round(0.4 s * fs)), cut peak-to-peak beats with
duration in [0.3, 2.0] s, Fourier-resample each to 100 samples, average.
Peak search uses scipy.signal.find_peaks; resampling uses the half
spectrum (rfft) with the same Nyquist conventions as the benchmark's
full-FFT version.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import find_peaks

TEMPLATE_LEN = 100
MIN_PEAK_DISTANCE_S = 0.4
MIN_PROMINENCE = 0.1
BEAT_GAP_MIN_S = 0.3
BEAT_GAP_MAX_S = 2.0


class NoValidBeats(Exception):
    pass


def zscore(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    sd = float(np.std(x))
    if sd == 0.0:
        raise NoValidBeats("flat segment")
    return (x - float(np.mean(x))) / sd


def resample_spectrum(x: np.ndarray, target_len: int) -> np.ndarray:
    """Length change by half-spectrum truncation / zero padding.

    Downsampling to an even length folds the discarded conjugate bin into
    the surviving Nyquist bin; upsampling from an even length halves the
    source Nyquist bin.  Values scale by target_len/len(x).
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    m = int(target_len)
    if m < 2:
        raise ValueError("target_len must be >= 2")
    spectrum = np.fft.rfft(x)
    out = np.zeros(m // 2 + 1, dtype=complex)
    half = min(n, m)
    kmax = (half - 1) // 2
    out[: kmax + 1] = spectrum[: kmax + 1]
    if half % 2 == 0:
        ny = half // 2
        if m < n:
            # both conjugate source bins land on the target Nyquist bin
            out[ny] = 2.0 * spectrum[ny].real
        elif m > n:
            out[ny] = 0.5 * spectrum[ny].real
        else:
            out[ny] = spectrum[ny]
    return np.fft.irfft(out, n=m) * (m / n)


def detect_peaks(z: np.ndarray, fs_hz: float) -> np.ndarray:
    """Systolic peak indices of a z-scored segment."""
    distance = int(round(MIN_PEAK_DISTANCE_S * fs_hz))
    peaks, _ = find_peaks(z, distance=max(distance, 1), prominence=MIN_PROMINENCE)
    return peaks


def beat_template(segment: np.ndarray, fs_hz: float) -> np.ndarray:
    """100-sample averaged beat template of one raw segment."""
    z = zscore(segment)
    peaks = detect_peaks(z, fs_hz)
    if peaks.size < 2:
        raise NoValidBeats("fewer than 2 peaks")
    beats = []
    for a, b in zip(peaks[:-1], peaks[1:]):
        gap_s = (b - a) / fs_hz
        if BEAT_GAP_MIN_S <= gap_s <= BEAT_GAP_MAX_S:
            beats.append(resample_spectrum(z[a:b], TEMPLATE_LEN))
    if not beats:
        raise NoValidBeats("no peak-to-peak gap in [0.3, 2.0] s")
    return np.mean(np.stack(beats), axis=0)
