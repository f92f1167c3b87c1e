"""
Risk-factor simulation: outer scenario paths and inner re-simulations.

Both supported models have Gaussian, independent increments, so every step
is sampled from the exact transition law and no discretisation error enters
the comparison between the nested oracle and the regression approximators.
"""

from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from fwdim import rng
from fwdim.errors import ValidationError

DEFAULT_MPOR = 10.0 / 365.0

# Paths are generated in fixed-size blocks, one substream per block. The block
# size is part of the reproducibility contract: changing it changes the paths.
PATH_BLOCK = 1024

_TIME_TOL = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    """
    Observation times together with the margin period of risk.

    Each observation time ``t_k`` is paired with ``t_k + mpor``; the pair is
    stored explicitly instead of forcing ``mpor`` onto the uniform grid.

    Attributes
    ----------
    obs_times : np.ndarray
        Strictly increasing, non-negative year fractions.
    mpor : float
        Margin period of risk (year fraction), strictly positive.
    horizon : float, optional
        Simulation horizon. Defaults to ``obs_times[-1] + mpor``.
    """

    obs_times: np.ndarray
    mpor: float
    horizon: float | None = None

    def __post_init__(self) -> None:
        t = np.asarray(self.obs_times, dtype=float).reshape(-1)
        if t.size == 0:
            raise ValidationError("obs_times must be non-empty")
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise ValidationError("obs_times must be finite and non-negative")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("obs_times must be strictly increasing")
        if not (np.isfinite(self.mpor) and self.mpor > 0):
            raise ValidationError(f"mpor must be > 0, got {self.mpor}")
        horizon = float(t[-1] + self.mpor) if self.horizon is None else float(self.horizon)
        if t[-1] + self.mpor > horizon + _TIME_TOL:
            raise ValidationError("every obs time plus mpor must lie within the horizon")
        t.setflags(write=False)
        object.__setattr__(self, "obs_times", t)
        object.__setattr__(self, "mpor", float(self.mpor))
        object.__setattr__(self, "horizon", horizon)

    @property
    def n_obs(self) -> int:
        return int(self.obs_times.size)

    @property
    def sim_times(self) -> np.ndarray:
        """Interleaved ``[t_0, t_0+mpor, t_1, t_1+mpor, ...]``."""
        out = np.empty(2 * self.n_obs)
        out[0::2] = self.obs_times
        out[1::2] = self.obs_times + self.mpor
        return out


def build_time_grid(horizon: float, step: float, mpor: float = DEFAULT_MPOR) -> TimeGrid:
    """Uniform grid ``0, step, 2*step, ...`` keeping only ``t`` with ``t + mpor <= horizon``.

    Requires ``0 < mpor < step <= horizon``.
    """
    for name, v in (("horizon", horizon), ("step", step), ("mpor", mpor)):
        if not np.isfinite(v) or v <= 0:
            raise ValidationError(f"{name} must be a positive finite number, got {v}")
    if not mpor < step:
        raise ValidationError(f"mpor ({mpor}) must be smaller than step ({step})")
    if step > horizon:
        raise ValidationError(f"step ({step}) must not exceed horizon ({horizon})")
    n = int(np.floor((horizon - mpor) / step + _TIME_TOL)) + 1
    times = step * np.arange(n)
    times = times[times + mpor <= horizon + _TIME_TOL]
    return TimeGrid(times, mpor, horizon)


@dataclass(frozen=True)
class GBM:
    """Geometric Brownian motion ``dS = mu S dt + sigma S dW``."""

    s0: float
    mu: float = 0.0
    sigma: float = 0.2

    def __post_init__(self) -> None:
        if not self.s0 > 0:
            raise ValidationError(f"GBM s0 must be > 0, got {self.s0}")
        if not self.sigma >= 0:
            raise ValidationError(f"GBM sigma must be >= 0, got {self.sigma}")

    @property
    def initial_state(self) -> float:
        return float(self.s0)

    def transition(self, x: np.ndarray, dt: float, z: np.ndarray) -> np.ndarray:
        """Exact lognormal step of length ``dt`` driven by standard normals ``z``."""
        return x * np.exp((self.mu - 0.5 * self.sigma**2) * dt + self.sigma * np.sqrt(dt) * z)


@dataclass(frozen=True)
class OrnsteinUhlenbeck:
    """Mean-reverting ``dx = kappa (theta - x) dt + sigma dW``."""

    x0: float
    kappa: float
    theta: float = 0.0
    sigma: float = 0.01

    def __post_init__(self) -> None:
        if not self.kappa > 0:
            raise ValidationError(f"OU kappa must be > 0, got {self.kappa}")
        if not self.sigma >= 0:
            raise ValidationError(f"OU sigma must be >= 0, got {self.sigma}")

    @property
    def initial_state(self) -> float:
        return float(self.x0)

    def transition(self, x: np.ndarray, dt: float, z: np.ndarray) -> np.ndarray:
        decay = np.exp(-self.kappa * dt)
        # expm1 keeps the variance accurate for kappa * dt << 1
        var = self.sigma**2 * -np.expm1(-2.0 * self.kappa * dt) / (2.0 * self.kappa)
        return self.theta + (x - self.theta) * decay + np.sqrt(var) * z


ModelSpec = GBM | OrnsteinUhlenbeck


@dataclass(frozen=True)
class PathCube:
    """
    Outer-simulation factor values indexed ``(path, time, factor)``.

    The time axis follows :attr:`TimeGrid.sim_times`: column ``2k`` holds the
    state at ``t_k`` and column ``2k + 1`` the state at ``t_k + mpor``.
    """

    values: np.ndarray
    grid: TimeGrid
    seed: int
    model: ModelSpec = field(repr=False)

    def __post_init__(self) -> None:
        v = self.values
        if v.ndim != 3 or v.shape[1] != 2 * self.grid.n_obs:
            raise ValidationError(f"values shape {v.shape} inconsistent with grid")
        if not np.all(np.isfinite(v)):
            raise ValidationError("path cube contains non-finite values")
        if isinstance(self.model, GBM) and np.any(v <= 0):
            raise ValidationError("GBM paths must be strictly positive")
        v.setflags(write=False)

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def n_times(self) -> int:
        return self.values.shape[1]

    @property
    def n_factors(self) -> int:
        return self.values.shape[2]

    def at(self, k: int, shifted: bool = False) -> np.ndarray:
        """Factor-0 values at ``t_k`` (or ``t_k + mpor`` when ``shifted``)."""
        return self.values[:, 2 * k + int(shifted), 0]


def _simulate_block(model: ModelSpec, times: np.ndarray, seed: int, block: int) -> np.ndarray:
    z = rng.substream(seed, rng.OUTER, block).standard_normal((PATH_BLOCK, times.size))
    out = np.empty((PATH_BLOCK, times.size))
    x = np.full(PATH_BLOCK, model.initial_state)
    prev = 0.0
    for j, t in enumerate(times):
        x = model.transition(x, t - prev, z[:, j])
        out[:, j] = x
        prev = t
    return out


def simulate_paths(
    model: ModelSpec, grid: TimeGrid, n_paths: int, seed: int, threads: int = 1
) -> PathCube:
    """
    Simulate outer scenarios at every ``t_k`` and ``t_k + mpor``.

    Paths are produced in blocks of :data:`PATH_BLOCK`, each block drawing from
    its own substream, so path ``i`` is identical for any ``n_paths > i`` and
    for any number of worker threads.

    Parameters
    ----------
    model : GBM or OrnsteinUhlenbeck
    grid : TimeGrid
    n_paths : int
        Number of outer paths, at least 1.
    seed : int
    threads : int
        Worker threads used to generate blocks.

    Returns
    -------
    PathCube
    """
    if n_paths < 1:
        raise ValidationError(f"n_paths must be >= 1, got {n_paths}")
    times = grid.sim_times
    n_blocks = -(-n_paths // PATH_BLOCK)
    values = np.empty((n_blocks * PATH_BLOCK, times.size))

    def work(b: int) -> None:
        values[b * PATH_BLOCK : (b + 1) * PATH_BLOCK] = _simulate_block(model, times, seed, b)

    if threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(n_blocks)))
    else:
        for b in range(n_blocks):
            work(b)
    cube = values[:n_paths, :, None].copy()
    return PathCube(cube, grid, int(seed), model)


def simulate_inner(
    model: ModelSpec,
    state: float | Sequence[float],
    t: float,
    delta: float,
    n_inner: int,
    seed: int | Sequence[int],
) -> np.ndarray:
    """Draw ``n_inner`` states at ``t + delta`` conditional on ``state`` at ``t``.

    ``seed`` may be an int or a tuple ``(seed, *key)`` naming a substream.
    Returns an array of shape ``(n_inner, n_factors)``.
    """
    if n_inner < 2:
        raise ValidationError(f"n_inner must be >= 2, got {n_inner}")
    if not delta > 0:
        raise ValidationError(f"delta must be > 0, got {delta}")
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    x = np.asarray(state, dtype=float).reshape(-1)
    if x.size != 1:
        raise ValidationError(f"expected a single-factor state, got {x.size} factors")
    if isinstance(model, GBM) and x[0] <= 0:
        raise ValidationError("GBM state must be positive")
    key = (seed,) if isinstance(seed, (int, np.integer)) else tuple(seed)
    z = rng.substream(*key).standard_normal(n_inner)
    return model.transition(np.full(n_inner, x[0]), delta, z)[:, None]
