"""Least-squares fits of scaling laws.

Three models are supported:

``power``
    log y = c0 + sum_j c_j log x_j  (one or more explanatory columns)
``two-term``
    y = c1 u + c2 v, fitted on log y so that small and large values weigh
    equally
``log``
    y = a + b log x, fitted on y itself
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import PreconditionError

MODELS = ("power", "two-term", "log")


@dataclass(frozen=True)
class FitResult:
    model: str
    coefficients: np.ndarray
    residual: float            # RMS of the residuals in the fitted variable
    max_residual: float
    fitted: np.ndarray         # model values at the inputs, in y units

    @property
    def slope(self):
        """The coefficient of the first explanatory variable."""
        return float(self.coefficients[1] if self.model != "two-term" else self.coefficients[0])


def _design(x):
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def fit_scaling(x, y, model="power"):
    """Fit ``y`` against ``x`` (shape (n,) or (n, k)) under ``model``.

    Raises ``PreconditionError`` for fewer than three points, non-positive
    data where logs are needed, or a rank-deficient design.
    """
    if model not in MODELS:
        raise PreconditionError(f"unknown model {model!r}; choose from {MODELS}")
    X = _design(x)
    y = np.asarray(y, dtype=float)
    if len(y) < 3 or X.shape[0] != len(y):
        raise PreconditionError("need at least three matching (x, y) records")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise PreconditionError("non-finite values in fit input")

    if model == "log":
        if X.shape[1] != 1 or np.any(X <= 0):
            raise PreconditionError("log model takes one positive column")
        A = np.column_stack([np.ones(len(y)), np.log(X[:, 0])])
        coef = _lstsq(A, y)
        fitted = A @ coef
        res = y - fitted
    elif model == "power":
        if np.any(X <= 0) or np.any(y <= 0):
            raise PreconditionError("power model needs positive data")
        A = np.column_stack([np.ones(len(y)), np.log(X)])
        coef = _lstsq(A, np.log(y))
        res = np.log(y) - A @ coef
        fitted = np.exp(A @ coef)
    else:
        if X.shape[1] != 2 or np.any(X < 0) or np.any(y <= 0):
            raise PreconditionError("two-term model takes two nonnegative columns and y > 0")
        _lstsq(X, y)  # rank check
        c0 = np.maximum(np.linalg.lstsq(X, y, rcond=None)[0], 1e-12 * np.max(y))
        sol = least_squares(lambda c: np.log(X @ c) - np.log(y), c0,
                            bounds=(1e-300, np.inf), xtol=1e-15, ftol=1e-15, gtol=1e-15)
        coef = sol.x
        fitted = X @ coef
        res = np.log(y) - np.log(fitted)
    return FitResult(model, np.asarray(coef), float(np.sqrt(np.mean(res ** 2))),
                     float(np.max(np.abs(res))), np.asarray(fitted))


def _lstsq(A, b):
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise PreconditionError("degenerate design matrix")
    return np.linalg.lstsq(A, b, rcond=None)[0]
