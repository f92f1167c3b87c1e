"""Polynomial least-squares approximation of the conditional second moment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from fwdim.errors import ValidationError
from fwdim.regression import RegressionData

MAX_DEGREE = 6
# relative threshold on |R_ii| below which the design is treated as rank deficient
_RANK_TOL = 1e-10


@dataclass(frozen=True)
class PolyFit:
    """
    Fitted polynomial ``sum_i coef[i] * z**i`` in the standardised variable
    ``z = (x - x_mean) / x_scale``.
    """

    degree: int
    coef: np.ndarray
    x_mean: float
    x_scale: float
    x_min: float
    x_max: float
    ridge: float = 0.0

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.coef)):
            raise ValidationError("polynomial coefficients must be finite")
        if not self.x_scale > 0:
            raise ValidationError("x_scale must be > 0")

    def extrapolates(self, x_query) -> np.ndarray:
        """Boolean mask of queries outside the training range."""
        x = np.asarray(x_query, dtype=float)
        return (x < self.x_min) | (x > self.x_max)

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "coefficients": [float(c) for c in self.coef],
            "x_mean": self.x_mean,
            "x_scale": self.x_scale,
            "x_min": self.x_min,
            "x_max": self.x_max,
            "ridge": self.ridge,
        }


def basis(z: np.ndarray, degree: int) -> np.ndarray:
    """Monomial design matrix ``[1, z, z**2, ...]`` with one row per sample."""
    return np.vander(np.asarray(z, dtype=float), degree + 1, increasing=True)


def fit_polynomial(data: RegressionData, degree: int = 2, ridge: float = 0.0) -> PolyFit:
    """
    Least-squares polynomial fit of ``data.y`` on ``data.x``.

    The design matrix is built on the standardised regressor and solved by a
    QR factorisation. ``ridge > 0`` adds a penalty ``n * ridge * |beta[1:]|^2``
    through row augmentation, leaving the intercept free.

    Raises
    ------
    ValidationError
        If ``degree`` is out of range, there are too few samples, or the design
        is rank deficient (e.g. constant ``x`` with ``degree >= 1``).
    """
    if not 0 <= degree <= MAX_DEGREE:
        raise ValidationError(f"degree must be in [0, {MAX_DEGREE}], got {degree}")
    if ridge < 0:
        raise ValidationError(f"ridge must be >= 0, got {ridge}")
    x, y = data.x, data.y
    n = x.size
    if n <= degree + 1:
        raise ValidationError(f"need more than degree + 1 = {degree + 1} samples, got {n}")
    x_mean = float(x.mean())
    x_scale = float(x.std())
    if x_scale == 0:
        if degree > 0:
            raise ValidationError("rank-deficient design: x is constant")
        x_scale = 1.0
    a = basis((x - x_mean) / x_scale, degree)
    rhs = y
    if ridge > 0 and degree > 0:
        pen = np.zeros((degree, degree + 1))
        pen[:, 1:] = np.sqrt(n * ridge) * np.eye(degree)
        a = np.vstack([a, pen])
        rhs = np.concatenate([y, np.zeros(degree)])
    q, r = np.linalg.qr(a)
    diag = np.abs(np.diag(r))
    if diag.min() <= _RANK_TOL * max(diag.max(), np.finfo(float).tiny):
        raise ValidationError("rank-deficient design matrix")
    coef = solve_triangular(r, q.T @ rhs)
    return PolyFit(degree, coef, x_mean, x_scale, float(x.min()), float(x.max()), float(ridge))


def predict_polynomial(fit: PolyFit, x_query, return_info: bool = False):
    """Evaluate the fitted polynomial at ``x_query``.

    Queries outside the training range are allowed. With ``return_info`` the
    result is ``(predictions, extrapolated_mask)``.
    """
    x = np.asarray(x_query, dtype=float)
    z = (x.reshape(-1) - fit.x_mean) / fit.x_scale
    pred = (basis(z, fit.degree) @ fit.coef).reshape(x.shape)
    if return_info:
        return pred, fit.extrapolates(x)
    return pred
