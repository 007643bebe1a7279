"""Estimators of the asymptotic variance of the volatility-fit difference.

Five interchangeable estimators cover the usual sampling regimes:

* ``v1`` - bipower sum of adjacent squared returns; robust to irregular
  observation times and time-varying volatility.
* ``v2`` - truncated bipower plus a jump correction built from one-sided
  local (spot) variance-intensity estimates; irregular times with jumps.
* ``v3`` - constant volatility on a regular grid, a plain plug-in.
* ``v4`` - scaled quarticity; regular grid, time-varying volatility.
* ``v5`` - truncated quarticity plus a jump correction with one-sided
  spot variances; regular grid with jumps.

Returns fed to these functions are estimated-price returns by default;
callers may pass raw returns instead where stability matters more than
formula fidelity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import WindowTooLarge

RIGHT = "right"
LEFT = "left"


@dataclass(frozen=True)
class TruncationConfig:
    """Threshold and window choices for the jump-robust estimators.

    The threshold for a return over a spacing ``dt`` is
    ``alpha0 * sigma_exp * dt**omega`` with ``sigma_exp`` the square root
    of the current volatility fit; ``k_spot`` is the one-sided window
    length (default: floor(sqrt(N))).
    """

    omega: float = 0.48
    alpha0: float = 4.0
    k_spot: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.omega < 0.5:
            raise ValueError("omega must lie in (0, 1/2)")
        if self.alpha0 <= 0:
            raise ValueError("alpha0 must be positive")
        if self.k_spot is not None and self.k_spot < 2:
            raise ValueError("k_spot must be at least 2")

    def window(self, n: int) -> int:
        k = self.k_spot if self.k_spot is not None else int(math.isqrt(n))
        return max(k, 2)

    def check_window(self, n: int, spacing: float, horizon: float) -> int:
        k = self.window(n)
        if k * spacing >= horizon / 4.0:
            raise WindowTooLarge(
                f"window k={k} spans {k * spacing:.3g} >= horizon/4"
            )
        return k


def _thresholds(cfg: TruncationConfig, sigma2_exp: float, dt) -> np.ndarray:
    return cfg.alpha0 * math.sqrt(max(sigma2_exp, 0.0)) * np.asarray(dt) ** cfg.omega


def v1(dx, n_obs: int, horizon: float) -> float:
    """Bipower variance estimator, ``4N/T^2`` times the adjacent products."""
    dx = np.asarray(dx, dtype=float)
    if n_obs < 3:
        raise ValueError("bipower estimator needs at least 3 returns")
    return 4.0 * n_obs / horizon**2 * float(np.dot(dx[1:] ** 2, dx[:-1] ** 2))


def _trunc_cumsum(dx2_kept: np.ndarray) -> np.ndarray:
    out = np.zeros(len(dx2_kept) + 1)
    np.cumsum(dx2_kept, out=out[1:])
    return out


def spot_sigma2alpha(
    dx,
    grid,
    i: int,
    side: str,
    cfg: TruncationConfig,
    sigma2_exp: float,
    horizon: float,
) -> float:
    """One-sided truncated local average of squared returns at tick ``i``.

    ``i`` is the 1-based return index; the right window averages returns
    i+1 .. i+k and the left value equals the right value at i-k-1.
    """
    dx = np.asarray(dx, dtype=float)
    grid = np.asarray(grid, dtype=float)
    n = len(dx)
    spacing = horizon / n
    k = cfg.check_window(n, spacing, horizon)
    if side == LEFT:
        return spot_sigma2alpha(dx, grid, i - k - 1, RIGHT, cfg, sigma2_exp, horizon)
    if side != RIGHT:
        raise ValueError("side must be 'right' or 'left'")
    if i + k > n or i < 0:
        raise WindowTooLarge(f"right window at i={i} exceeds the sample of {n}")
    u = _thresholds(cfg, sigma2_exp, np.diff(grid))
    kept = dx**2 * (np.abs(dx) <= u)
    return float(np.sum(kept[i : i + k])) / (k * spacing)


def v2(
    dx,
    grid,
    cfg: TruncationConfig,
    sigma2_exp: float,
    horizon: float,
) -> float:
    """Truncated bipower plus spot-weighted jump terms (irregular times)."""
    dx = np.asarray(dx, dtype=float)
    grid = np.asarray(grid, dtype=float)
    n = len(dx)
    spacing = horizon / n
    k = cfg.check_window(n, spacing, horizon)
    if n <= 2 * k + 2:
        raise WindowTooLarge(f"need more than 2k+2 = {2 * k + 2} returns, got {n}")
    u = _thresholds(cfg, sigma2_exp, np.diff(grid))
    keep = np.abs(dx) <= u
    dx2 = dx**2
    kept2 = dx2 * keep

    cont = float(np.dot(kept2[1:], kept2[:-1])) / spacing

    csum = _trunc_cumsum(kept2)

    def right(idx0):
        # window over 0-based return indices idx0+1 .. idx0+k
        return (csum[idx0 + 1 + k] - csum[idx0 + 1]) / (k * spacing)

    jump = 0.0
    exceed = np.nonzero(~keep)[0]
    for idx0 in exceed:
        i = idx0 + 1  # 1-based
        if i < k + 1 or i > n - k:
            continue
        jump += dx2[idx0] * (right(idx0) + right(idx0 - k - 1))
    return 4.0 / horizon * (cont + jump)


def v3(sigma2_exp: float) -> float:
    """Plug-in estimator for constant volatility."""
    if sigma2_exp < 0:
        raise ValueError("sigma2_exp must be nonnegative")
    return 4.0 * sigma2_exp**2


def v4(dx, n_obs: int, horizon: float) -> float:
    """Scaled quarticity, regular grid."""
    dx = np.asarray(dx, dtype=float)
    if n_obs < 1:
        raise ValueError("quarticity needs at least 1 return")
    return 4.0 * n_obs / (3.0 * horizon**2) * float(np.sum(dx**4))


def v5(
    dx,
    spacing: float,
    cfg: TruncationConfig,
    sigma2_exp: float,
    horizon: float,
) -> float:
    """Truncated quarticity plus spot-weighted jump terms (regular grid)."""
    dx = np.asarray(dx, dtype=float)
    n = len(dx)
    k = cfg.check_window(n, spacing, horizon)
    if n <= 2 * k + 2:
        raise WindowTooLarge(f"need more than 2k+2 = {2 * k + 2} returns, got {n}")
    u = cfg.alpha0 * math.sqrt(max(sigma2_exp, 0.0)) * spacing**cfg.omega
    keep = np.abs(dx) <= u
    dx2 = dx**2
    kept2 = dx2 * keep

    cont = float(np.sum((dx2 * keep) ** 2)) / (3.0 * spacing)

    csum = _trunc_cumsum(kept2)

    def spot(idx0):
        return (csum[idx0 + 1 + k] - csum[idx0 + 1]) / (k * spacing)

    jump = 0.0
    for idx0 in np.nonzero(~keep)[0]:
        i = idx0 + 1
        if i < k + 1 or i > n - k:
            continue
        jump += dx2[idx0] * (spot(idx0) + spot(idx0 - k - 1))
    return 4.0 / horizon * (cont + jump)
