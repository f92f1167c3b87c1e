"""
Ground-truth forward initial margin by brute-force nested Monte Carlo.

For every outer node ``(path, t_k)`` the state is re-simulated to
``t_k + mpor``, the netting set is revalued on each inner draw, and the IM is
the empirical quantile of the resulting PnL cloud.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from fwdim import rng
from fwdim.errors import ValidationError
from fwdim.portfolio import NettingSet, value_netting_set, value_states
from fwdim.sde import ModelSpec, PathCube, TimeGrid, simulate_inner, simulate_paths

MIN_INNER = 100


def empirical_quantile(samples, p: float) -> float:
    """
    Order-statistic quantile with linear interpolation (Hyndman-Fan type 7).

    With sorted samples ``x_(1) <= ... <= x_(n)`` and ``h = (n - 1) p + 1``
    the estimate is ``x_(floor h) + (h - floor h) (x_(floor h + 1) - x_(floor h))``.
    """
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValidationError("empirical_quantile needs at least one sample")
    if not 0 < p < 1:
        raise ValidationError(f"p must lie in (0, 1), got {p}")
    h = (x.size - 1) * p
    lo = int(np.floor(h))
    g = h - lo
    hi = min(lo + 1, x.size - 1)
    part = np.partition(x, [lo, hi])
    return float((1.0 - g) * part[lo] + g * part[hi])


@dataclass(frozen=True)
class ImSurface:
    """
    Per-path, per-observation-time initial margin.

    Attributes
    ----------
    im : np.ndarray
        Non-negative IM, shape ``(n_paths, n_obs)``.
    times : np.ndarray
        Observation times ``t_k``.
    p : float
        Quantile level used.
    n_outer, n_inner : int
        Simulation sizes; ``n_inner`` is 0 for regression estimates.
    """

    im: np.ndarray
    times: np.ndarray
    p: float
    n_outer: int
    n_inner: int

    def __post_init__(self) -> None:
        if self.im.ndim != 2 or self.im.shape[1] != len(self.times):
            raise ValidationError(f"im shape {self.im.shape} inconsistent with times")
        if np.any(self.im < 0) or not np.all(np.isfinite(self.im)):
            raise ValidationError("IM surface must be finite and non-negative")

    @property
    def profile(self) -> np.ndarray:
        return expected_im_profile(self)

    @property
    def stderr(self) -> np.ndarray:
        n = self.im.shape[0]
        if n < 2:
            return np.zeros(self.im.shape[1])
        return self.im.std(axis=0, ddof=1) / np.sqrt(n)


def expected_im_profile(surface: ImSurface) -> np.ndarray:
    """Arithmetic mean of the IM over paths at each observation time."""
    return surface.im.mean(axis=0)


def margin_from_quantile(q: float, p: float) -> float:
    """Posted IM for ``p >= 0.5``, received-IM magnitude for ``p < 0.5``; floored at 0."""
    return max(q, 0.0) if p >= 0.5 else max(-q, 0.0)


def brute_force_im(
    model: ModelSpec,
    ns: NettingSet,
    grid: TimeGrid,
    n_outer: int,
    n_inner: int,
    p: float = 0.99,
    seed: int = 0,
    rate: float = 0.0,
    threads: int = 1,
    cube: PathCube | None = None,
) -> ImSurface:
    """
    Nested Monte Carlo IM surface.

    Outer paths come from :func:`simulate_paths` with ``seed``; the inner cloud
    at node ``(i, k)`` uses substream ``(seed, INNER, i, k)``, so each node is an
    independent, schedule-free unit of work.

    Parameters
    ----------
    model, ns, grid
        Dynamics, portfolio and time grid.
    n_outer : int
        Outer paths (>= 1).
    n_inner : int
        Inner draws per node (>= 100, the tail needs mass).
    p : float
        Quantile level. ``p < 0.5`` reports the received-IM magnitude.
    seed : int
    rate : float
        Flat discount rate passed to the pricers.
    threads : int
        Worker threads over outer paths.
    cube : PathCube, optional
        Pre-simulated outer paths; its first ``n_outer`` paths are used.
    """
    if n_outer < 1:
        raise ValidationError(f"n_outer must be >= 1, got {n_outer}")
    if n_inner < MIN_INNER:
        raise ValidationError(f"n_inner must be >= {MIN_INNER}, got {n_inner}")
    if not 0 < p < 1:
        raise ValidationError(f"p must lie in (0, 1), got {p}")
    ns.check_model(model)
    if cube is None:
        cube = simulate_paths(model, grid, n_outer, seed, threads=threads)
    elif cube.n_paths < n_outer:
        raise ValidationError("supplied cube has fewer than n_outer paths")
    values = value_netting_set(ns, cube, model, rate)
    times = grid.obs_times
    im = np.empty((n_outer, grid.n_obs))

    def node_row(i: int) -> None:
        for k, t in enumerate(times):
            inner = simulate_inner(
                model, cube.values[i, 2 * k, :], t, grid.mpor, n_inner, (seed, rng.INNER, i, k)
            )
            v_next = value_states(ns, inner[:, 0], t + grid.mpor, model, rate)
            pnl = v_next - values[i, 2 * k]
            im[i, k] = margin_from_quantile(empirical_quantile(pnl, p), p)

    if threads > 1 and n_outer > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(node_row, range(n_outer)))
    else:
        for i in range(n_outer):
            node_row(i)
    return ImSurface(im, times.copy(), p, n_outer, n_inner)
