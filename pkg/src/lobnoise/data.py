"""Canonical containers for tick data and observed returns.

Timestamps are stored as annualized reals on [0, T] (one trading day is
T = 1/252 by convention elsewhere in the package), so that the mean
spacing T/N enters likelihoods directly.  Instances are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import InsufficientData

#: Recognized limit-order-book covariates and their constraints.
COVARIATE_NAMES = ("I", "V", "D", "S", "QD", "OFI")


@dataclass(frozen=True)
class TickSeries:
    """Observed log-prices with timestamps and aligned LOB covariates.

    Attributes
    ----------
    times : ndarray, shape (N+1,)
        Strictly increasing observation times in [0, horizon].
    prices : ndarray, shape (N+1,)
        Log-price levels at the observation times.
    covariates : dict of str -> ndarray
        Optional per-tick records keyed by name: trade sign ``I`` in
        {-1, +1}, volume ``V`` >= 0, duration ``D`` > 0, spread ``S`` > 0,
        quoted depth ``QD`` >= 0, order-flow imbalance ``OFI``.
    horizon : float
        Session horizon T > 0 (annualized).
    """

    times: np.ndarray
    prices: np.ndarray
    covariates: Mapping[str, np.ndarray] = field(default_factory=dict)
    horizon: float = 1.0 / 252.0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        prices = np.asarray(self.prices, dtype=float)
        if times.ndim != 1 or prices.ndim != 1:
            raise ValueError("times and prices must be 1-d arrays")
        if len(times) != len(prices):
            raise ValueError(
                f"times ({len(times)}) and prices ({len(prices)}) differ in length"
            )
        if len(times) < 2:
            raise InsufficientData("a tick series needs at least 2 observations")
        cov = {k: np.asarray(v, dtype=float) for k, v in self.covariates.items()}
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "covariates", cov)

    @property
    def n_returns(self) -> int:
        """Number of returns N (one less than the number of ticks)."""
        return len(self.times) - 1

    @property
    def mean_spacing(self) -> float:
        """Mean observation spacing T/N."""
        return self.horizon / self.n_returns

    def covariate(self, name: str) -> np.ndarray:
        return self.covariates[name]

    def has_covariates(self, names) -> bool:
        return all(name in self.covariates for name in names)


@dataclass(frozen=True)
class ReturnSeries:
    """First differences of observed log-prices.

    ``values[i-1]`` holds Y_i = Z_{t_i} - Z_{t_{i-1}} for i = 1..N, and
    ``mean_spacing`` is T/N.
    """

    values: np.ndarray
    mean_spacing: float

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.mean_spacing <= 0:
            raise ValueError("mean_spacing must be positive")


def returns(series: TickSeries) -> ReturnSeries:
    """Observed log returns of a tick series.

    Raises
    ------
    InsufficientData
        If the series has fewer than 2 observations (already enforced at
        construction, re-checked here for defensive use).
    """
    if len(series.prices) < 2:
        raise InsufficientData("need at least 2 prices to form returns")
    values = np.diff(series.prices)
    return ReturnSeries(values=values, mean_spacing=series.horizon / len(values))


def validate(series: TickSeries) -> list[str]:
    """Check every container invariant; return one message per violation.

    An empty list means the series is valid.  Messages carry the rule
    name and the offending index, e.g. ``NonMonotoneTime@2``.
    """
    violations: list[str] = []
    times, prices = series.times, series.prices
    n = len(times)

    if n != len(prices):
        violations.append(f"LengthMismatch@prices:{len(prices)}")
    if n < 2:
        violations.append("InsufficientData@0")
    if n and times[0] < 0:
        violations.append("NegativeStartTime@0")
    if n and times[-1] > series.horizon * (1 + 1e-12):
        violations.append(f"TimeBeyondHorizon@{n - 1}")
    bad = np.nonzero(np.diff(times) <= 0)[0]
    for idx in bad:
        violations.append(f"NonMonotoneTime@{idx + 1}")
    if not np.all(np.isfinite(prices)):
        idx = int(np.nonzero(~np.isfinite(prices))[0][0])
        violations.append(f"NonFinitePrice@{idx}")

    checks = {
        "I": lambda x: np.abs(np.abs(x) - 1.0) < 1e-12,
        "V": lambda x: x >= 0,
        "D": lambda x: x > 0,
        "S": lambda x: x > 0,
        "QD": lambda x: x >= 0,
        "OFI": lambda x: np.isfinite(x),
    }
    rule_names = {
        "I": "InvalidTradeSign",
        "V": "NegativeVolume",
        "D": "NonPositiveDuration",
        "S": "NonPositiveSpread",
        "QD": "NegativeQuotedDepth",
        "OFI": "NonFiniteImbalance",
    }
    for name, values in series.covariates.items():
        if len(values) != n:
            violations.append(f"CovariateLengthMismatch@{name}:{len(values)}")
            continue
        if name in checks:
            ok = checks[name](values)
            for idx in np.nonzero(~ok)[0]:
                violations.append(f"{rule_names[name]}@{idx}")
    return violations


def prices_from_returns(initial: float, ret: ReturnSeries) -> np.ndarray:
    """Reconstruct price levels from an initial level and returns."""
    out = np.empty(len(ret.values) + 1)
    out[0] = initial
    np.cumsum(ret.values, out=out[1:])
    out[1:] += initial
    return out
