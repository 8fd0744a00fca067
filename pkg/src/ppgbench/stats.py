"""Age-gap computation and its raw / age-adjusted associations with
cardiovascular markers.

Partial correlations go through linear residualization on chronological age,
with one degree of freedom charged for the covariate (df = n - 3).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

P_FLOOR = 1e-300
MARKER_NAMES = ("sbp", "dbp", "bmi")
BONFERRONI_TESTS = 3


@dataclass(frozen=True)
class MarkerAssociation:
    marker: str
    raw_r: float
    raw_p: float
    partial_r: float
    partial_p: float
    n: int


@dataclass(frozen=True)
class AgeGapResult:
    rows: list[MarkerAssociation]
    bonferroni_threshold: float


def age_gap(predictions: np.ndarray, true_ages: np.ndarray) -> np.ndarray:
    """Predicted minus chronological age, per subject."""
    predictions = np.asarray(predictions, dtype=np.float64)
    true_ages = np.asarray(true_ages, dtype=np.float64)
    if predictions.shape != true_ages.shape:
        raise ValueError("predictions and ages must align")
    return predictions - true_ages


def pearson_with_p(
    x: np.ndarray, y: np.ndarray, df_reduction: int = 0
) -> tuple[float, float]:
    """Sample Pearson correlation with a two-sided Student-t p-value.

    p = I_{df/(df+t^2)}(df/2, 1/2) with df = n - 2 - df_reduction, via the
    regularized incomplete beta function.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if n < 3 + df_reduction:
        raise ValueError("too few observations for the requested df")
    xd = x - x.mean()
    yd = y - y.mean()
    sx = float(np.sqrt(np.sum(xd**2)))
    sy = float(np.sqrt(np.sum(yd**2)))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("correlation undefined for a constant vector")
    r = float(np.dot(xd, yd) / (sx * sy))
    r = max(-1.0, min(1.0, r))
    df = n - 2 - df_reduction
    if abs(r) == 1.0:
        return r, P_FLOOR
    p = float(betainc(df / 2.0, 0.5, df / (df + df * r**2 / (1.0 - r**2))))
    return r, max(p, P_FLOOR)


def residualize(v: np.ndarray, covariate: np.ndarray) -> np.ndarray:
    """Residuals of the simple least-squares regression of v on the
    covariate (intercept included); exactly uncorrelated with it."""
    v = np.asarray(v, dtype=np.float64)
    c = np.asarray(covariate, dtype=np.float64)
    cd = c - c.mean()
    denom = float(np.sum(cd**2))
    if denom == 0.0:
        raise ValueError("constant covariate")
    slope = float(np.dot(v - v.mean(), cd)) / denom
    return v - (v.mean() + slope * cd)


def age_gap_associations(
    gaps: np.ndarray,
    ages: np.ndarray,
    markers: dict[str, np.ndarray],
) -> AgeGapResult:
    """Raw and age-adjusted Pearson associations of the age gap with each
    marker, Bonferroni threshold 0.05/3."""
    gaps = np.asarray(gaps, dtype=np.float64)
    ages = np.asarray(ages, dtype=np.float64)
    rows = []
    gap_resid = residualize(gaps, ages)
    for name, values in markers.items():
        values = np.asarray(values, dtype=np.float64)
        raw_r, raw_p = pearson_with_p(gaps, values)
        partial_r, partial_p = pearson_with_p(
            gap_resid, residualize(values, ages), df_reduction=1
        )
        rows.append(
            MarkerAssociation(
                marker=name,
                raw_r=raw_r,
                raw_p=raw_p,
                partial_r=partial_r,
                partial_p=partial_p,
                n=gaps.size,
            )
        )
    return AgeGapResult(rows=rows, bonferroni_threshold=0.05 / BONFERRONI_TESTS)
