"""Standardization, closed-form Ridge regression, leave-one-out alpha
selection over a fixed grid, and the predict-the-mean baseline.

The ridge estimator is defined on the standardized design matrix Z with an
unpenalized intercept handled by centering the targets:

    beta = (Z'Z + alpha*I)^-1 Z'(y - ybar),   yhat = ybar + Z_new beta

Alpha selection uses the exact leave-one-out identity for penalized least
squares, e_i = (y_i - yhat_i) / (1 - h_ii), with leverages taken from an SVD
of the (column-centered) standardized matrix plus the 1/n intercept term.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLeverageError

ALPHA_GRID = (0.01, 0.1, 1.0, 10.0, 100.0, 1000.0)


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray
    constant_columns: np.ndarray  # bool per column

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        means = X.mean(axis=0)
        stds = X.std(axis=0)
        constant = stds == 0.0
        stds = np.where(constant, 1.0, stds)
        return cls(means=means, stds=stds, constant_columns=constant)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.means) / self.stds

    def inverse_transform(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z, dtype=np.float64) * self.stds + self.means


@dataclass(frozen=True)
class RidgeModel:
    standardizer: Standardizer
    coefficients: np.ndarray
    intercept: float
    alpha: float
    loo_mse_per_alpha: dict[float, float] = field(default_factory=dict)

    def predict(self, X: np.ndarray) -> np.ndarray:
        Z = self.standardizer.transform(X)
        return self.intercept + Z @ self.coefficients


def _check_finite(X: np.ndarray, y: np.ndarray) -> None:
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite values in the design matrix or targets")


def ridge_fit(
    X: np.ndarray,
    y: np.ndarray,
    alpha: float,
    loo_mse_per_alpha: dict[float, float] | None = None,
) -> RidgeModel:
    """Closed-form ridge fit on the standardized design matrix."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] < 2:
        raise ValueError("need at least 2 rows to fit")
    _check_finite(X, y)
    standardizer = Standardizer.fit(X)
    Z = standardizer.transform(X)
    ybar = float(np.mean(y))
    gram = Z.T @ Z + alpha * np.eye(Z.shape[1])
    beta = np.linalg.solve(gram, Z.T @ (y - ybar))
    return RidgeModel(
        standardizer=standardizer,
        coefficients=beta,
        intercept=ybar,
        alpha=float(alpha),
        loo_mse_per_alpha=dict(loo_mse_per_alpha or {}),
    )


def _loo_residuals_from_svd(U, s, y, ybar, alpha):
    n = y.size
    shrink = s**2 / (s**2 + alpha)
    fitted = ybar + U @ (shrink * (U.T @ (y - ybar)))
    leverage = 1.0 / n + (U**2) @ shrink
    bad = np.nonzero(leverage >= 1.0 - 1e-12)[0]
    if bad.size:
        raise DegenerateLeverageError(
            f"leverage >= 1 at row {int(bad[0])} for alpha={alpha}"
        )
    return (y - fitted) / (1.0 - leverage)


def loo_residuals(X: np.ndarray, y: np.ndarray, alpha: float) -> np.ndarray:
    """Exact leave-one-out residuals of the ridge fit, without refitting.

    Equals y_i minus the prediction of a model trained with row i held out
    (intercept unpenalized, standardization from the full design).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] < 3:
        raise ValueError("need at least 3 rows for leave-one-out residuals")
    _check_finite(X, y)
    Z = Standardizer.fit(X).transform(X)
    U, s, _ = np.linalg.svd(Z, full_matrices=False)
    return _loo_residuals_from_svd(U, s, y, float(np.mean(y)), alpha)


def select_alpha_loo(
    X: np.ndarray,
    y: np.ndarray,
    grid: tuple[float, ...] = ALPHA_GRID,
) -> tuple[float, dict[float, float]]:
    """Pick the grid alpha minimizing exact leave-one-out MSE (ties go to
    the smaller alpha)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if n < 3:
        raise ValueError("need at least 3 rows for leave-one-out selection")
    _check_finite(X, y)
    Z = Standardizer.fit(X).transform(X)
    ybar = float(np.mean(y))
    U, s, _ = np.linalg.svd(Z, full_matrices=False)
    mse_per_alpha: dict[float, float] = {}
    for alpha in grid:
        residuals = _loo_residuals_from_svd(U, s, y, ybar, alpha)
        mse_per_alpha[float(alpha)] = float(np.mean(residuals**2))
    best = min(mse_per_alpha, key=lambda a: (mse_per_alpha[a], a))
    return best, mse_per_alpha


def fit_with_alpha_selection(
    X: np.ndarray, y: np.ndarray, grid: tuple[float, ...] = ALPHA_GRID
) -> RidgeModel:
    alpha, mse_per_alpha = select_alpha_loo(X, y, grid)
    return ridge_fit(X, y, alpha, loo_mse_per_alpha=mse_per_alpha)


@dataclass(frozen=True)
class BaselinePredictor:
    """Predicts the training mean everywhere."""

    mean: float

    def predict(self, X: np.ndarray | None = None, n: int | None = None) -> np.ndarray:
        if n is None:
            n = np.asarray(X).shape[0]
        return np.full(n, self.mean)


def baseline_fit(y: np.ndarray) -> BaselinePredictor:
    y = np.asarray(y, dtype=np.float64)
    if y.size < 1:
        raise ValueError("need at least one target")
    return BaselinePredictor(mean=float(np.mean(y)))
