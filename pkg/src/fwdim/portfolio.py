"""
Closed-form path-wise valuation of a netting set.

Instruments are priced analytically from the simulated state, never by inner
simulation. ``state`` is the factor-0 value and may be a scalar or an array of
path values; every pricer is vectorised over it.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr

from fwdim.errors import ValidationError
from fwdim.sde import GBM, ModelSpec, OrnsteinUhlenbeck, PathCube

_T_TOL = 1e-12


def _check_notional(notional: float) -> None:
    if not (np.isfinite(notional) and notional != 0):
        raise ValidationError(f"notional must be finite and nonzero, got {notional}")


@dataclass(frozen=True)
class ForwardContract:
    """Long ``notional`` units of the underlying against a strike paid at maturity.

    Linear in the state, so it is priceable under either model.
    """

    strike: float
    maturity: float
    notional: float = 1.0

    def __post_init__(self) -> None:
        _check_notional(self.notional)


@dataclass(frozen=True)
class EuropeanCall:
    """Black-Scholes call on a GBM underlying, priced with its own vol ``vol``."""

    strike: float
    maturity: float
    vol: float
    notional: float = 1.0

    def __post_init__(self) -> None:
        _check_notional(self.notional)
        if self.strike < 0 or self.vol < 0:
            raise ValidationError("call strike and vol must be non-negative")


@dataclass(frozen=True)
class ZeroCouponBondOU:
    """Zero-coupon bond when the OU factor is the short rate."""

    maturity: float
    notional: float = 1.0

    def __post_init__(self) -> None:
        _check_notional(self.notional)


Instrument = ForwardContract | EuropeanCall | ZeroCouponBondOU


@dataclass(frozen=True)
class NettingSet:
    instruments: tuple[Instrument, ...]

    def __init__(self, instruments: Sequence[Instrument]):
        instruments = tuple(instruments)
        if not instruments:
            raise ValidationError("netting set must contain at least one instrument")
        object.__setattr__(self, "instruments", instruments)

    def scaled(self, factor: float) -> NettingSet:
        """Copy with every notional multiplied by ``factor``."""
        return NettingSet([replace(i, notional=i.notional * factor) for i in self.instruments])

    def check_model(self, model: ModelSpec, horizon: float | None = None) -> None:
        for instr in self.instruments:
            _check_compatible(instr, model)
            if horizon is not None and instr.maturity < horizon - _T_TOL:
                raise ValidationError(
                    f"{type(instr).__name__} maturity {instr.maturity} precedes horizon {horizon}"
                )


def _check_compatible(instr: Instrument, model: ModelSpec) -> None:
    if isinstance(instr, EuropeanCall) and not isinstance(model, GBM):
        raise ValidationError("EuropeanCall requires a GBM model")
    if isinstance(instr, ZeroCouponBondOU) and not isinstance(model, OrnsteinUhlenbeck):
        raise ValidationError("ZeroCouponBondOU requires an OrnsteinUhlenbeck model")


def _black_scholes_call(s, k, tau, vol, rate):
    s = np.asarray(s, dtype=float)
    df = np.exp(-rate * tau)
    if tau <= 0:
        return np.maximum(s - k, 0.0)
    if k == 0:
        return s.copy()
    if vol == 0:
        return np.maximum(s - k * df, 0.0)
    sd = vol * np.sqrt(tau)
    d1 = (np.log(s / k) + (rate + 0.5 * vol**2) * tau) / sd
    return s * ndtr(d1) - k * df * ndtr(d1 - sd)


def _vasicek_zcb(x, tau, model: OrnsteinUhlenbeck):
    kappa, theta, sigma = model.kappa, model.theta, model.sigma
    b = -np.expm1(-kappa * tau) / kappa
    a = (theta - sigma**2 / (2 * kappa**2)) * (b - tau) - sigma**2 * b**2 / (4 * kappa)
    return np.exp(a - b * np.asarray(x, dtype=float))


def value(instr: Instrument, state, t: float, model: ModelSpec, rate: float = 0.0) -> np.ndarray:
    """Value of ``instr`` at time ``t`` given the factor ``state``.

    ``rate`` is the flat discount rate for the forward strike leg and the call.
    """
    _check_compatible(instr, model)
    if t > instr.maturity + _T_TOL:
        raise ValidationError(f"valuation time {t} is after maturity {instr.maturity}")
    tau = max(instr.maturity - t, 0.0)
    if isinstance(instr, ForwardContract):
        v = np.asarray(state, dtype=float) - instr.strike * np.exp(-rate * tau)
    elif isinstance(instr, EuropeanCall):
        v = _black_scholes_call(state, instr.strike, tau, instr.vol, rate)
    else:
        v = _vasicek_zcb(state, tau, model)
    return instr.notional * v


def value_netting_set(
    ns: NettingSet, cube: PathCube, model: ModelSpec, rate: float = 0.0
) -> np.ndarray:
    """Netting-set value matrix indexed ``(path, sim_time)``.

    Columns follow ``cube.grid.sim_times`` (``t_k`` then ``t_k + mpor``).
    """
    times = cube.grid.sim_times
    out = np.zeros((cube.n_paths, times.size))
    for j, t in enumerate(times):
        state = cube.values[:, j, 0]
        for instr in ns.instruments:
            out[:, j] += value(instr, state, t, model, rate)
    if not np.all(np.isfinite(out)):
        raise ValidationError("netting-set valuation produced non-finite values")
    return out


def value_states(ns: NettingSet, states, t: float, model: ModelSpec, rate: float = 0.0):
    """Netting-set value for an array of states at a single time."""
    states = np.asarray(states, dtype=float)
    total = np.zeros(states.shape)
    for instr in ns.instruments:
        total += value(instr, states, t, model, rate)
    return total
