"""Run a regression approximator over every observation time to get an IM surface."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from fwdim.errors import ValidationError
from fwdim.kernel import KernelSpec, local_poly_fit_predict, make_local_fit
from fwdim.linear_maps import fit_polynomial, predict_polynomial
from fwdim.neural_net import FittedMlp, MlpSpec, TrainConfig, predict_nn, train
from fwdim.oracle import ImSurface
from fwdim.regression import (
    QuantileScaler,
    RegressionData,
    build_regression_data,
    im_from_second_moment,
)
from fwdim.sde import TimeGrid

METHODS = ("poly", "kernel", "nn")


@dataclass(frozen=True)
class PolySettings:
    degree: int = 2
    ridge: float = 0.0


@dataclass(frozen=True)
class KernelSettings:
    kernel: KernelSpec = field(default_factory=KernelSpec)
    order: int = 1


@dataclass(frozen=True)
class NnSettings:
    hidden: tuple[int, ...] = (16, 16)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0


@dataclass
class StepResult:
    m_hat: np.ndarray
    artifact: dict
    model: object = None


@dataclass
class ApproxResult:
    surface: ImSurface
    steps: list[StepResult]


def _fit_step(method: str, data: RegressionData, settings) -> StepResult:
    # a deterministic regressor (e.g. every path at t=0) carries no information:
    # the projection collapses onto constants
    if np.ptp(data.x) == 0:
        mean = float(data.y.mean())
        return StepResult(np.full(data.n, mean), {"degenerate_regressor": True, "mean": mean})
    if method == "poly":
        fit = fit_polynomial(data, settings.degree, settings.ridge)
        pred, extrap = predict_polynomial(fit, data.x, return_info=True)
        art = fit.to_dict() | {"n_extrapolated": int(extrap.sum())}
        return StepResult(pred, art, fit)
    if method == "kernel":
        fit = make_local_fit(data.x, data.y, settings.kernel, settings.order)
        pred, degraded = local_poly_fit_predict(fit, data.x, return_info=True)
        art = fit.to_dict() | {"n_degraded": int(degraded.sum())}
        return StepResult(pred, art, fit)
    if method == "nn":
        spec = MlpSpec.hidden(settings.hidden, d_in=1, seed=settings.seed)
        fitted: FittedMlp = train(spec, settings.train, data)
        pred = predict_nn(fitted, data.x)
        art = {
            "widths": list(spec.widths),
            "epochs_run": len(fitted.history),
            "best_epoch": fitted.best_epoch,
            "final_mse": fitted.history[fitted.best_epoch - 1] if fitted.history else None,
        }
        return StepResult(pred, art, fitted)
    raise ValidationError(f"unknown method {method!r}; expected one of {METHODS}")


def approximate_im(
    method: str,
    values: np.ndarray,
    grid: TimeGrid,
    scaler: QuantileScaler,
    settings,
    regressor: np.ndarray | None = None,
    threads: int = 1,
) -> ApproxResult:
    """
    Fit ``method`` at each observation time and convert to per-path IM.

    Parameters
    ----------
    method : {"poly", "kernel", "nn"}
    values : np.ndarray
        Netting-set value matrix ``(path, sim_time)``.
    grid : TimeGrid
    scaler : NormalScaler or StudentTScaler
    settings : PolySettings, KernelSettings or NnSettings
    regressor : np.ndarray, optional
        ``(path, n_obs)`` alternative regressor; defaults to ``V(t_k)``.
    threads : int
        Time steps are fitted concurrently; results do not depend on it.
    """
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; expected one of {METHODS}")

    def step(k: int) -> StepResult:
        reg = None if regressor is None else regressor[:, k]
        return _fit_step(method, build_regression_data(values, grid, k, reg), settings)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            steps = list(pool.map(step, range(grid.n_obs)))
    else:
        steps = [step(k) for k in range(grid.n_obs)]
    im = np.column_stack([im_from_second_moment(s.m_hat, scaler) for s in steps])
    surface = ImSurface(im, grid.obs_times.copy(), scaler.p, values.shape[0], 0)
    return ApproxResult(surface, steps)
