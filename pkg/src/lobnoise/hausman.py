"""Residual-noise tests and the practical volatility-selection sequence.

The core statistic compares the no-residual-noise volatility fit with
the noise-robust fit: ``S = N * (sigma2_exp - sigma2_err)**2 / V`` with
``V`` one of the five asymptotic-variance estimators.  Under a correctly
specified offset model and no residual noise, S is asymptotically
chi-squared with one degree of freedom.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from . import avar
from .avar import TruncationConfig
from .data import TickSeries
from .errors import DegenerateVariance, GridNotRegular
from .estimators import (
    DEFAULT_BOUNDS,
    SMALL_TEST,
    FitBounds,
    FitResult,
    efficient_price,
    fit_err,
    fit_exp,
    realized_variance,
)
from .models import NoiseModel

RV_RAW = "RV_raw"
QMLE_ERR = "QMLE_err"
QMLE_EXP = "QMLE_exp"


def chi2_1_sf(x: float) -> float:
    """Upper tail of the chi-squared(1) law via the incomplete gamma."""
    if x < 0:
        return 1.0
    return float(special.gammaincc(0.5, 0.5 * x))


def chi2_1_quantile(p: float) -> float:
    """p-quantile of the chi-squared(1) law."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    return 2.0 * float(special.gammainccinv(0.5, 1.0 - p))


@dataclass(frozen=True)
class TestComponents:
    sigma2_exp: float
    sigma2_err: float
    v_hat: float
    n_obs: int


@dataclass(frozen=True)
class TestReport:
    """Outcome of one residual-noise test."""

    statistic: float
    avar_variant: int
    p_value: float
    level: float
    reject: bool
    components: TestComponents


@dataclass(frozen=True)
class SequenceResult:
    """Outcome of the staged volatility-selection procedure."""

    chosen_estimate: float
    provenance: str
    stage_reports: tuple


def hausman(
    sigma2_exp: float,
    sigma2_err: float,
    n_obs: int,
    v_hat: float,
    level: float,
    avar_variant: int = 0,
) -> TestReport:
    """Assemble a test report from the two fits and a variance estimate."""
    if v_hat <= 0:
        raise DegenerateVariance(f"variance estimate {v_hat} must be positive")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    stat = n_obs * (sigma2_exp - sigma2_err) ** 2 / v_hat
    critical = chi2_1_quantile(1.0 - level)
    return TestReport(
        statistic=float(stat),
        avar_variant=avar_variant,
        p_value=chi2_1_sf(stat),
        level=level,
        reject=bool(stat > critical),
        components=TestComponents(
            sigma2_exp=float(sigma2_exp),
            sigma2_err=float(sigma2_err),
            v_hat=float(v_hat),
            n_obs=int(n_obs),
        ),
    )


def grid_is_regular(times, rel_tol: float = 0.01) -> bool:
    """True when spacings deviate from their mean by less than rel_tol."""
    dt = np.diff(np.asarray(times, dtype=float))
    m = dt.mean()
    if m <= 0:
        return False
    return bool(np.max(np.abs(dt - m)) <= rel_tol * m)


def _resolve_variant(variant, times) -> int:
    if variant == "auto" or variant is None:
        return 3 if grid_is_regular(times) else 1
    variant = int(variant)
    if variant not in (1, 2, 3, 4, 5):
        raise ValueError("variant must be 1..5 or 'auto'")
    return variant


def estimate_avar(
    variant: int,
    dx: np.ndarray,
    times: np.ndarray,
    horizon: float,
    sigma2_exp: float,
    cfg: TruncationConfig,
) -> float:
    """Dispatch to the requested asymptotic-variance estimator."""
    n = len(dx)
    if variant in (3, 4, 5) and not grid_is_regular(times):
        warnings.warn(
            f"variant {variant} assumes a regular grid; spacings are dispersed",
            GridNotRegular,
        )
    if variant == 1:
        return avar.v1(dx, n, horizon)
    if variant == 2:
        return avar.v2(dx, times, cfg, sigma2_exp, horizon)
    if variant == 3:
        return avar.v3(sigma2_exp)
    if variant == 4:
        return avar.v4(dx, n, horizon)
    if variant == 5:
        return avar.v5(dx, horizon / n, cfg, sigma2_exp, horizon)
    raise ValueError(f"unknown variant {variant}")


@dataclass(frozen=True)
class DayFits:
    """Both fits plus the return basis shared by the test statistics."""

    fit_exp: FitResult
    fit_err: FitResult
    dx: np.ndarray
    rv_raw: float


def prepare_fits(
    series: TickSeries,
    model: NoiseModel,
    bounds: FitBounds = DEFAULT_BOUNDS,
    noise_space: str = SMALL_TEST,
    use_raw_returns: bool = False,
) -> DayFits:
    """Run the two fits once so several statistics can share them."""
    fe = fit_exp(series, model, bounds)
    fr = fit_err(series, model, bounds, noise_space)
    if use_raw_returns:
        dx = np.diff(series.prices)
    else:
        dx = np.diff(efficient_price(series, model, fe.theta).values)
    return DayFits(fit_exp=fe, fit_err=fr, dx=dx, rv_raw=realized_variance(series))


def run_test(
    series: TickSeries,
    model: NoiseModel,
    variant="auto",
    level: float = 0.05,
    cfg: TruncationConfig = TruncationConfig(),
    bounds: FitBounds = DEFAULT_BOUNDS,
    use_raw_returns: bool = False,
    fits: Optional[DayFits] = None,
) -> TestReport:
    """Full residual-noise test on one day of tick data."""
    variant = _resolve_variant(variant, series.times)
    if fits is None:
        fits = prepare_fits(series, model, bounds, use_raw_returns=use_raw_returns)
    v_hat = estimate_avar(
        variant,
        fits.dx,
        series.times,
        series.horizon,
        fits.fit_exp.sigma2,
        cfg,
    )
    return hausman(
        fits.fit_exp.sigma2,
        fits.fit_err.sigma2,
        fits.fit_exp.n_obs,
        v_hat,
        level,
        avar_variant=variant,
    )


def select_volatility(
    series: TickSeries,
    model: NoiseModel,
    level: float = 0.05,
    cfg: TruncationConfig = TruncationConfig(),
    bounds: FitBounds = DEFAULT_BOUNDS,
    variant="auto",
    fits: Optional[DayFits] = None,
) -> SequenceResult:
    """Staged estimate: raw RV, then the noise-robust or offset-only fit.

    Stage 1 tests raw realized variance against the noise-robust fit; if
    that test does not reject, RV on the raw data is returned.  Otherwise
    stage 2 runs the residual-noise test: rejection selects the robust
    fit, non-rejection the offset-only fit.  Both stages share one
    variance estimator, computed on the same return basis.
    """
    variant = _resolve_variant(variant, series.times)
    if fits is None:
        fits = prepare_fits(series, model, bounds)
    v_hat = estimate_avar(
        variant, fits.dx, series.times, series.horizon, fits.fit_exp.sigma2, cfg
    )
    n = fits.fit_exp.n_obs
    stage1 = hausman(
        fits.rv_raw, fits.fit_err.sigma2, n, v_hat, level, avar_variant=variant
    )
    if not stage1.reject:
        return SequenceResult(
            chosen_estimate=fits.rv_raw,
            provenance=RV_RAW,
            stage_reports=(stage1,),
        )
    stage2 = hausman(
        fits.fit_exp.sigma2,
        fits.fit_err.sigma2,
        n,
        v_hat,
        level,
        avar_variant=variant,
    )
    if stage2.reject:
        return SequenceResult(
            chosen_estimate=fits.fit_err.sigma2,
            provenance=QMLE_ERR,
            stage_reports=(stage1, stage2),
        )
    return SequenceResult(
        chosen_estimate=fits.fit_exp.sigma2,
        provenance=QMLE_EXP,
        stage_reports=(stage1, stage2),
    )
