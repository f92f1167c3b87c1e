"""
Shared machinery for the regression approximators.

Under a centred local-Normal assumption the IM at a node is
``sqrt(E[pnl^2 | X]) * q`` where ``q`` is a standardised quantile. The
approximators only have to estimate the conditional second moment; this
module builds their training data and turns their predictions into IM.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from fwdim import rng
from fwdim.errors import ValidationError
from fwdim.sde import TimeGrid


@dataclass(frozen=True)
class RegressionData:
    """Regressor ``x = V(t_k)`` and target ``y = (V(t_k + mpor) - V(t_k))**2``."""

    t_index: int
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float).reshape(-1)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if x.shape != y.shape:
            raise ValidationError(f"x and y lengths differ: {x.size} vs {y.size}")
        if x.size == 0:
            raise ValidationError("regression data must be non-empty")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValidationError("regression data must be finite")
        if np.any(y < 0):
            raise ValidationError("targets are squared PnL and must be non-negative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size


def build_regression_data(
    values: np.ndarray, grid: TimeGrid, t_index: int, regressor: np.ndarray | None = None
) -> RegressionData:
    """
    Regression pair for observation time ``t_index``.

    ``values`` is the ``(path, sim_time)`` matrix from
    :func:`fwdim.portfolio.value_netting_set`. ``regressor`` optionally replaces
    ``V(t_k)`` as the explanatory variable (e.g. the risk factor itself).
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] != 2 * grid.n_obs:
        raise ValidationError(
            f"value matrix shape {values.shape} does not hold (t_k, t_k+mpor) pairs for the grid"
        )
    if not 0 <= t_index < grid.n_obs:
        raise ValidationError(f"t_index {t_index} out of range [0, {grid.n_obs})")
    v0 = values[:, 2 * t_index]
    pnl = values[:, 2 * t_index + 1] - v0
    x = v0 if regressor is None else np.asarray(regressor, dtype=float)
    return RegressionData(t_index, x, pnl * pnl)


@dataclass(frozen=True)
class NormalScaler:
    p: float = 0.99

    def __post_init__(self) -> None:
        if not 0 < self.p < 1:
            raise ValidationError(f"p must lie in (0, 1), got {self.p}")

    def factor(self) -> float:
        return float(stats.norm.ppf(self.p))


@dataclass(frozen=True)
class StudentTScaler:
    """Student-t quantile rescaled to unit variance (needs ``dof > 2``)."""

    p: float = 0.99
    dof: float = 5.0

    def __post_init__(self) -> None:
        if not 0 < self.p < 1:
            raise ValidationError(f"p must lie in (0, 1), got {self.p}")
        if not self.dof > 2:
            raise ValidationError(f"Student-t dof must be > 2 for finite variance, got {self.dof}")

    def factor(self) -> float:
        return float(stats.t.ppf(self.p, self.dof) * np.sqrt((self.dof - 2.0) / self.dof))


QuantileScaler = NormalScaler | StudentTScaler


def im_from_second_moment(m_hat, scaler: QuantileScaler) -> np.ndarray:
    """IM per path from predicted second moments; negative predictions clamp to 0."""
    m = np.asarray(m_hat, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValidationError("second-moment predictions must be finite")
    return np.sqrt(np.maximum(m, 0.0)) * scaler.factor()


@dataclass(frozen=True)
class MomentEstimate:
    estimate: float
    cv: float


@dataclass(frozen=True)
class MomentReport:
    """
    Moment estimates with bootstrap coefficients of variation.

    ``moments`` maps 1 -> mean, 2 -> variance, 4 -> raw fourth moment.
    """

    moments: dict[int, MomentEstimate]
    n_samples: int
    n_boot: int
    cv_threshold: float
    verdict: str = field(default="pass")

    def to_dict(self) -> dict:
        def clean(v: float):
            return float(v) if np.isfinite(v) else None

        return {
            "n_samples": self.n_samples,
            "n_boot": self.n_boot,
            "cv_threshold": self.cv_threshold,
            "verdict": self.verdict,
            "moments": {
                str(k): {"estimate": clean(m.estimate), "bootstrap_cv": clean(m.cv)}
                for k, m in sorted(self.moments.items())
            },
        }


MIN_DIAGNOSTIC_SAMPLES = 100
DEFAULT_CV_THRESHOLD = 0.1


def _stats(x: np.ndarray) -> np.ndarray:
    # shift by x[0] so a constant sample has exactly zero variance
    d = x - x[0]
    return np.array([x.mean(), np.mean((d - d.mean()) ** 2), np.mean(x**4)])


def _cv(boot: np.ndarray, estimate: float) -> float:
    sd = boot.std(ddof=1)
    if sd == 0:
        return 0.0
    scale = abs(estimate)
    return float(sd / scale) if scale > 0 else float("inf")


def moment_diagnostics(
    samples,
    n_boot: int = 200,
    seed: int = 0,
    cv_threshold: float = DEFAULT_CV_THRESHOLD,
) -> MomentReport:
    """
    Check that a sample plausibly has finite mean, variance and fourth moment.

    The fourth-moment estimate is bootstrapped; when its coefficient of
    variation exceeds ``cv_threshold`` the estimate is dominated by a few
    extreme points and the report is flagged.

    Notes
    -----
    For a non-negative statistic averaged over ``n`` points the bootstrap CV
    equals ``sqrt(sum a^2 / (sum a)^2 - 1/n)`` and is therefore always below 1,
    so the threshold must sit well under 1 to be informative.
    """
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size < MIN_DIAGNOSTIC_SAMPLES:
        raise ValidationError(
            f"moment diagnostics need >= {MIN_DIAGNOSTIC_SAMPLES} samples, got {x.size}"
        )
    if n_boot < 100:
        raise ValidationError(f"n_boot must be >= 100, got {n_boot}")
    est = _stats(x)
    gen = rng.substream(seed, rng.BOOTSTRAP)
    boot = np.empty((n_boot, 3))
    for b in range(n_boot):
        boot[b] = _stats(x[gen.integers(0, x.size, x.size)])
    moments = {
        k: MomentEstimate(float(est[j]), _cv(boot[:, j], est[j])) for j, k in enumerate((1, 2, 4))
    }
    fourth = moments[4]
    ok = np.all(np.isfinite(est)) and fourth.cv <= cv_threshold
    return MomentReport(moments, x.size, n_boot, cv_threshold, "pass" if ok else "flag")
