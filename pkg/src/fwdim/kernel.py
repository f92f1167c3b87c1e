"""
Nadaraya-Watson and local-linear kernel regression on a single regressor.

Training pairs are stored in a canonical order (sorted by ``x`` then ``y``),
so predictions do not depend on the order in which the data were supplied.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from fwdim.errors import BandwidthStarvation, ValidationError
from fwdim.regression import RegressionData

KINDS = ("gaussian",)
RULES = ("silverman",)

# queries are processed in chunks so the (query, train) weight matrix stays small
_CHUNK_ELEMENTS = 2_000_000
_RANK_TOL = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """
    Kernel shape and bandwidth.

    ``squared=False`` switches to ``exp(-|x - x0| / (2 h^2))``, the form with an
    unsquared distance. Leave ``bandwidth`` as None to apply ``rule``.
    """

    kind: str = "gaussian"
    bandwidth: float | None = None
    rule: str = "silverman"
    squared: bool = True

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValidationError(f"unknown kernel kind {self.kind!r}")
        if self.bandwidth is not None and not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValidationError(f"bandwidth must be > 0, got {self.bandwidth}")
        if self.bandwidth is None and self.rule not in RULES:
            raise ValidationError(f"unknown bandwidth rule {self.rule!r}")


def silverman_bandwidth(x) -> float:
    """Rule-of-thumb ``1.06 * min(std, IQR / 1.34) * n**(-1/5)``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size < 2:
        raise ValidationError("silverman_bandwidth needs at least 2 samples")
    std = float(x.std(ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    iqr = float(q75 - q25)
    if std == 0:
        raise ValidationError("silverman_bandwidth: x has zero dispersion")
    spread = min(std, iqr / 1.34) if iqr > 0 else std
    return 1.06 * spread * x.size ** (-0.2)


def _weights(d: np.ndarray, h: float, squared: bool) -> np.ndarray:
    if squared:
        return np.exp(-(d * d) / (2.0 * h * h))
    return np.exp(-np.abs(d) / (2.0 * h * h))


def kernel_weight(spec: KernelSpec, x, x0, h: float | None = None):
    """Unnormalised kernel weight between ``x`` and the centre ``x0``."""
    h = spec.bandwidth if h is None else h
    if h is None or not h > 0:
        raise ValidationError("kernel_weight needs a resolved positive bandwidth")
    d = np.asarray(x, dtype=float) - np.asarray(x0, dtype=float)
    return _weights(d, h, spec.squared)


@dataclass(frozen=True)
class LocalFit:
    """Training data plus kernel for local-constant (order 0) or local-linear (order 1) fits."""

    x: np.ndarray
    y: np.ndarray
    kernel: KernelSpec
    order: int
    h: float

    @classmethod
    def from_data(cls, data: RegressionData, kernel: KernelSpec | None = None, order: int = 1):
        return make_local_fit(data.x, data.y, kernel, order)

    def to_dict(self) -> dict:
        return {
            "kind": self.kernel.kind,
            "squared": self.kernel.squared,
            "bandwidth": self.h,
            "rule": None if self.kernel.bandwidth is not None else self.kernel.rule,
            "order": self.order,
            "n_train": int(self.x.size),
        }


def make_local_fit(x, y, kernel: KernelSpec | None = None, order: int = 1) -> LocalFit:
    kernel = kernel or KernelSpec()
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.size == 0 or x.shape != y.shape:
        raise ValidationError("training set must be non-empty with matching x and y")
    if order not in (0, 1):
        raise ValidationError(f"order must be 0 or 1, got {order}")
    h = kernel.bandwidth if kernel.bandwidth is not None else silverman_bandwidth(x)
    idx = np.lexsort((y, x))
    xs, ys = x[idx], y[idx]
    xs.setflags(write=False)
    ys.setflags(write=False)
    return LocalFit(xs, ys, kernel, order, float(h))


def _chunks(n_query: int, n_train: int):
    step = max(1, _CHUNK_ELEMENTS // max(n_train, 1))
    for start in range(0, n_query, step):
        yield slice(start, min(start + step, n_query))


def _check_support(w_sum: np.ndarray, xq: np.ndarray, h: float) -> None:
    bad = np.flatnonzero(~(w_sum > 0))
    if bad.size:
        raise BandwidthStarvation(float(xq[bad[0]]), h)


def nw_estimate(fit: LocalFit, x_query) -> np.ndarray:
    """Nadaraya-Watson estimate ``sum K y / sum K`` at each query point."""
    xq = np.asarray(x_query, dtype=float)
    flat = xq.reshape(-1)
    out = np.empty(flat.size)
    for sl in _chunks(flat.size, fit.x.size):
        w = _weights(fit.x[None, :] - flat[sl, None], fit.h, fit.kernel.squared)
        w_sum = w.sum(axis=1)
        _check_support(w_sum, flat[sl], fit.h)
        out[sl] = (w @ fit.y) / w_sum
    return out.reshape(xq.shape)


def _local_solve(w: np.ndarray, d: np.ndarray, y: np.ndarray, order: int):
    """
    Weighted least squares per query row by Gram-Schmidt QR of ``sqrt(w) [1, d]``.

    Returns ``(beta0, beta1, degraded)``; rows whose local-linear design is rank
    deficient fall back to the local-constant solution.
    """
    sw = np.sqrt(w)
    b = sw * y[None, :]
    r11 = np.sqrt(np.sum(sw * sw, axis=1))
    q1 = sw / r11[:, None]
    c1 = np.sum(q1 * b, axis=1)
    beta0 = c1 / r11
    n_q = w.shape[0]
    beta1 = np.zeros(n_q)
    degraded = np.zeros(n_q, dtype=bool)
    if order == 0:
        return beta0, beta1, degraded
    a2 = sw * d
    a2_norm = np.sqrt(np.sum(a2 * a2, axis=1))
    r12 = np.sum(q1 * a2, axis=1)
    v = a2 - r12[:, None] * q1
    # second orthogonalisation pass
    s = np.sum(q1 * v, axis=1)
    v -= s[:, None] * q1
    r12 += s
    r22 = np.sqrt(np.sum(v * v, axis=1))
    ok = r22 > _RANK_TOL * a2_norm
    safe_r22 = np.where(ok, r22, 1.0)
    c2 = np.sum(v * b, axis=1) / safe_r22
    beta1 = np.where(ok, c2 / safe_r22, 0.0)
    beta0 = np.where(ok, (c1 - r12 * beta1) / r11, beta0)
    return beta0, beta1, ~ok


def local_poly_fit_predict(fit: LocalFit, x_query, return_info: bool = False):
    """
    Local polynomial estimate at each query.

    For each query ``x`` minimises ``sum K(x, x_i) (y_i - b0 - b1 (x_i - x))**2``
    (``b1`` dropped for order 0) and returns ``b0``. Queries whose weighted
    design is rank deficient are answered with the order-0 estimate and a
    warning. With ``return_info`` returns ``(predictions, degraded_mask)``.
    """
    xq = np.asarray(x_query, dtype=float)
    flat = xq.reshape(-1)
    out = np.empty(flat.size)
    degraded = np.zeros(flat.size, dtype=bool)
    for sl in _chunks(flat.size, fit.x.size):
        d = fit.x[None, :] - flat[sl, None]
        w = _weights(d, fit.h, fit.kernel.squared)
        _check_support(w.sum(axis=1), flat[sl], fit.h)
        out[sl], _, degraded[sl] = _local_solve(w, d, fit.y, fit.order)
    if degraded.any():
        warnings.warn(
            f"local-linear design rank deficient at {int(degraded.sum())} queries; "
            "used local-constant estimate there",
            RuntimeWarning,
            stacklevel=2,
        )
    out = out.reshape(xq.shape)
    if return_info:
        return out, degraded.reshape(xq.shape)
    return out


def local_coefficients(fit: LocalFit, x_query) -> tuple[np.ndarray, np.ndarray]:
    """Local intercept and slope at each query (slope is 0 for order 0)."""
    flat = np.asarray(x_query, dtype=float).reshape(-1)
    d = fit.x[None, :] - flat[:, None]
    w = _weights(d, fit.h, fit.kernel.squared)
    _check_support(w.sum(axis=1), flat, fit.h)
    b0, b1, _ = _local_solve(w, d, fit.y, fit.order)
    return b0, b1
