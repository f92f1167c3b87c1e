"""Margin valuation adjustment from an expected-IM profile, deterministic credit."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from fwdim.errors import ValidationError
from fwdim.sde import TimeGrid


@dataclass(frozen=True)
class MvaInputs:
    """
    Flat curves, all per year.

    Attributes
    ----------
    r : float
        Risk-free discount rate.
    hazard_bank, hazard_counterparty : float
        Default intensities of the bank and the counterparty.
    funding_spread : float
        Bank's borrowing spread on funded IM.
    im_spread : float
        Spread received on posted IM.
    recovery : float
        Counterparty recovery rate in [0, 1].
    """

    r: float = 0.0
    hazard_bank: float = 0.0
    hazard_counterparty: float = 0.0
    funding_spread: float = 0.0
    im_spread: float = 0.0
    recovery: float = 0.0

    def __post_init__(self) -> None:
        for name, val in asdict(self).items():
            if not np.isfinite(val):
                raise ValidationError(f"{name} must be finite, got {val}")
        if self.hazard_bank < 0 or self.hazard_counterparty < 0:
            raise ValidationError("hazard rates must be >= 0")
        if not 0 <= self.recovery <= 1:
            raise ValidationError(f"recovery must lie in [0, 1], got {self.recovery}")

    @property
    def carry_spread(self) -> float:
        return (1.0 - self.recovery) * self.funding_spread - self.im_spread

    @property
    def decay_rate(self) -> float:
        return self.r + self.hazard_bank + self.hazard_counterparty


def mva_deterministic(profile, grid: TimeGrid | np.ndarray, inp: MvaInputs) -> float:
    """
    Trapezoidal MVA seen from the first grid time.

    Integrates ``carry_spread * exp(-decay_rate * (u - t0)) * E[IM(u)]`` over the
    observation times, where the exponential combines discounting and the
    survival of both parties.
    """
    times = grid.obs_times if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    prof = np.asarray(profile, dtype=float).reshape(-1)
    if prof.size != times.size:
        raise ValidationError(f"profile length {prof.size} does not match grid length {times.size}")
    if np.any(prof < 0) or not np.all(np.isfinite(prof)):
        raise ValidationError("IM profile must be finite and non-negative")
    if times.size < 2 or inp.carry_spread == 0:
        return 0.0
    integrand = inp.carry_spread * np.exp(-inp.decay_rate * (times - times[0])) * prof
    return float(np.sum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(times)))
