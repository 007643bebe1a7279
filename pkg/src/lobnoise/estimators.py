"""Quasi-maximum-likelihood estimators of volatility and noise parameters.

Three fits are provided: the no-residual-noise fit (diagonal Gaussian
likelihood), the residual-noise fit (MA(1) likelihood) and the
no-information fit (MA(1) with a null offset model).  The residual-noise
fit runs on one of two parameter spaces for the noise variance:

``small-test``
    Extended space allowing slightly negative values, lower-bounded at
    -s/8 with s the per-return diffusion mass.  Used by the residual
    noise tests so the estimator is not pinned at zero under the null.
``large-noise``
    Strictly positive box [a2_min, a2_max] for data with genuinely
    noisy observations.

Optimization uses a scaled Nelder-Mead simplex for low-dimensional
offset models and quasi-Newton with the analytic offset gradient for
high-dimensional ones; both finish with a quasi-Newton polish so that
refits from a returned optimum stay put.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .data import TickSeries, returns
from .errors import (
    BoundarySolution,
    IndefiniteKernel,
    NoConvergence,
    Undefined,
)
from .likelihood import (
    LOG_2PI,
    MA1Kernel,
    _loglik_err_core,
    _loglik_exp_core,
    logdet,
    quadform,
)
from .models import NoiseModel, is_linear, mu, mu_grad, phi_path

SMALL_TEST = "small-test"
LARGE_NOISE = "large-noise"


@dataclass(frozen=True)
class FitBounds:
    """Parameter boxes shared by all fits (annualized variance units)."""

    sigma2_min: float = 1e-6
    sigma2_max: float = 10.0
    a2_min: float = 1e-14
    a2_max: float = 1e-4
    #: the extended testing space reaches down to -s/margin
    small_test_margin: float = 8.0


DEFAULT_BOUNDS = FitBounds()


@dataclass(frozen=True)
class FitResult:
    """Outcome of a likelihood fit.

    ``theta`` is None for the no-information variant and ``a2`` is None
    for the no-residual-noise variant.  ``bounds_hit`` names every
    coordinate pinned at its box edge.
    """

    variant: str
    sigma2: float
    theta: Optional[np.ndarray]
    a2: Optional[float]
    loglik: float
    iterations: int
    converged: bool
    bounds_hit: tuple = ()
    n_obs: int = 0


@dataclass(frozen=True)
class EfficientPricePath:
    """Estimated efficient log-price, piecewise constant between ticks."""

    times: np.ndarray
    values: np.ndarray


def realized_variance(series: TickSeries) -> float:
    """Annualized sum of squared raw returns."""
    y = np.diff(series.prices)
    return float(y @ y) / series.horizon


def _theta_ref(model: NoiseModel) -> np.ndarray:
    """Interior reference point of the parameter box (gradient anchor)."""
    if model.dim == 0:
        return np.empty(0)
    lo, hi = model.theta_bounds[:, 0], model.theta_bounds[:, 1]
    ref = np.zeros(model.dim)
    outside = (ref <= lo) | (ref >= hi)
    ref[outside] = 0.5 * (lo[outside] + hi[outside])
    return ref


def _project_box(x, lo, hi):
    return np.minimum(np.maximum(x, lo), hi)


def _least_squares_theta(model, series, y):
    """Exact or warm-start offset parameter from ordinary least squares."""
    if model.dim == 0:
        return np.empty(0), 1
    regressors = mu_grad(model, series, _theta_ref(model))
    theta, *_ = np.linalg.lstsq(regressors, y, rcond=None)
    lo, hi = model.theta_bounds[:, 0], model.theta_bounds[:, 1]
    inside = np.all(theta >= lo) and np.all(theta <= hi)
    if is_linear(model) and inside:
        return theta, 1

    theta0 = _project_box(theta, lo, hi)

    def rss_and_grad(t):
        resid = y - mu(model, series, t)
        grad = -2.0 * mu_grad(model, series, t).T @ resid
        return float(resid @ resid), grad

    res = optimize.minimize(
        rss_and_grad,
        theta0,
        jac=True,
        method="L-BFGS-B",
        bounds=list(zip(lo, hi)),
    )
    return res.x, int(res.nit) + 1


def fit_exp(series: TickSeries, model: NoiseModel, bounds: FitBounds = DEFAULT_BOUNDS) -> FitResult:
    """Fit (sigma2, theta) under the no-residual-noise likelihood.

    For offsets linear in theta this solves the normal equations exactly
    and sets sigma2 to the residual sum of squares over the horizon.
    """
    y = returns(series)
    model.check_covariates(series.covariates)
    theta, iterations = _least_squares_theta(model, series, y.values)
    resid = y.values - mu(model, series, theta) if model.dim else y.values
    n = len(resid)
    sigma2_raw = float(resid @ resid) / (n * y.mean_spacing)
    sigma2 = min(max(sigma2_raw, bounds.sigma2_min), bounds.sigma2_max)
    hit = []
    if sigma2 != sigma2_raw:
        hit.append("sigma2")
    lo, hi = model.theta_bounds[:, 0], model.theta_bounds[:, 1]
    for j in range(model.dim):
        if theta[j] <= lo[j] + 1e-15 or theta[j] >= hi[j] - 1e-15:
            hit.append(f"theta[{j}]")
    loglik = _loglik_exp_core(resid, sigma2, y.mean_spacing)
    return FitResult(
        variant="exp",
        sigma2=sigma2,
        theta=theta,
        a2=None,
        loglik=loglik,
        iterations=iterations,
        converged=True,
        bounds_hit=tuple(hit),
        n_obs=n,
    )


class _ErrObjective:
    """Negative MA(1) log-likelihood over scaled coordinates.

    Coordinates are x = (sigma2, theta..., a2) mapped to z through
    x = origin + scale * z so the simplex sees O(1) steps in every
    direction.  Inadmissible kernels return a large penalty, which makes
    the optimizer back off instead of surfacing an error.
    """

    PENALTY = 1e30

    def __init__(self, model, series, y, z_lo, z_hi, origin, scale):
        self.model = model
        self.series = series
        self.y = y
        self.spacing = y.mean_spacing
        self.origin = origin
        self.scale = scale
        self.z_lo = z_lo
        self.z_hi = z_hi
        self.dim = model.dim
        self._linear = is_linear(model)
        if self._linear and self.dim:
            self._regressors = mu_grad(model, series, _theta_ref(model))

    def to_x(self, z):
        return self.origin + self.scale * np.asarray(z, dtype=float)

    def to_z(self, x):
        return (np.asarray(x, dtype=float) - self.origin) / self.scale

    def resid(self, theta):
        if self.dim == 0:
            return self.y.values
        if self._linear:
            return self.y.values - self._regressors @ theta
        return self.y.values - mu(self.model, self.series, theta)

    def unpack(self, x):
        sigma2 = x[0]
        theta = x[1 : 1 + self.dim]
        a2 = x[1 + self.dim]
        return sigma2, theta, a2

    def value_x(self, x):
        sigma2, theta, a2 = self.unpack(x)
        if sigma2 <= 0:
            return self.PENALTY
        s = sigma2 * self.spacing
        if a2 < 0 and not 4.0 * abs(a2) < s:
            return self.PENALTY
        try:
            return -_loglik_err_core(self.resid(theta), sigma2, a2, self.spacing)
        except IndefiniteKernel:
            return self.PENALTY

    def __call__(self, z):
        return self.value_x(self.to_x(np.clip(z, self.z_lo, self.z_hi)))


def _kernel_solve(kernel: MA1Kernel, v: np.ndarray) -> np.ndarray:
    """Solve Omega x = v by LDL^T (dense-free, O(N))."""
    n = kernel.n
    diag, off = kernel.diag, kernel.off
    delta = np.empty(n)
    z = np.empty(n)
    delta[0] = diag
    z[0] = v[0]
    for i in range(1, n):
        lo = off / delta[i - 1]
        delta[i] = diag - off * lo
        z[i] = v[i] - lo * z[i - 1]
    x = np.empty(n)
    x[-1] = z[-1] / delta[-1]
    for i in range(n - 2, -1, -1):
        x[i] = z[i] / delta[i] - (off / delta[i]) * x[i + 1]
    return x


def _err_gradient_factory(obj: _ErrObjective):
    """Gradient in z: analytic for theta, finite differences otherwise."""

    def grad(z):
        z = np.clip(z, obj.z_lo, obj.z_hi)
        x = obj.to_x(z)
        sigma2, theta, a2 = obj.unpack(x)
        g = np.zeros_like(x)
        for idx in (0, len(x) - 1):
            h = 1e-6 * obj.scale[idx]
            xp = x.copy()
            xp[idx] += h
            xm = x.copy()
            xm[idx] -= h
            g[idx] = (obj.value_x(xp) - obj.value_x(xm)) / (2 * h)
        if obj.dim:
            try:
                resid = obj.resid(theta)
                kernel = MA1Kernel(n=len(resid), s=sigma2 * obj.spacing, a2=a2)
                sol = _kernel_solve(kernel, resid)
                dmu = (
                    obj._regressors
                    if obj._linear
                    else mu_grad(obj.model, obj.series, theta)
                )
                g[1 : 1 + obj.dim] = -(dmu.T @ sol)
            except IndefiniteKernel:
                g[1 : 1 + obj.dim] = 0.0
        return g * obj.scale

    return grad


def _run_err_optimizer(obj: _ErrObjective, z0, use_simplex, maxiter):
    """Simplex (optionally) followed by a quasi-Newton polish."""
    iterations = 0
    converged = False
    z = np.asarray(z0, dtype=float)
    zb = list(zip(obj.z_lo, obj.z_hi))
    if use_simplex:
        k = len(z)
        simplex = np.repeat(z[None, :], k + 1, axis=0)
        for j in range(k):
            step = 0.35
            up = z[j] + step <= obj.z_hi[j]
            simplex[j + 1, j] += step if up else -step
        nm = optimize.minimize(
            obj,
            z,
            method="Nelder-Mead",
            bounds=zb,
            options={
                "initial_simplex": simplex,
                "xatol": 1e-9,
                "fatol": 1e-10,
                "maxiter": maxiter,
            },
        )
        z = np.clip(nm.x, obj.z_lo, obj.z_hi)
        iterations += int(nm.nit)
        converged = bool(nm.success)
    polish = optimize.minimize(
        obj,
        z,
        jac=_err_gradient_factory(obj) if obj.dim > 2 else None,
        method="L-BFGS-B",
        bounds=zb,
        options={"maxiter": 200, "ftol": 1e-14, "gtol": 1e-10},
    )
    if polish.fun <= obj(z):
        z = np.clip(polish.x, obj.z_lo, obj.z_hi)
    iterations += int(polish.nit)
    converged = converged or bool(polish.success)
    return z, iterations, converged


def _starting_values(resid, spacing, bounds, a_lo, a_hi):
    n = len(resid)
    m0 = float(resid @ resid) / n
    gamma1 = float(resid[1:] @ resid[:-1]) / (n - 1) if n > 1 else 0.0
    a2_0 = min(max(-gamma1, a_lo if a_lo > 0 else 0.0), a_hi)
    sigma2_0 = (m0 + 2.0 * gamma1) / spacing
    if not np.isfinite(sigma2_0) or sigma2_0 <= bounds.sigma2_min:
        sigma2_0 = max(m0 / spacing, bounds.sigma2_min * 2)
    sigma2_0 = min(max(sigma2_0, bounds.sigma2_min), bounds.sigma2_max)
    return sigma2_0, a2_0


def fit_err(
    series: TickSeries,
    model: NoiseModel,
    bounds: FitBounds = DEFAULT_BOUNDS,
    noise_space: str = SMALL_TEST,
    start=None,
) -> FitResult:
    """Fit (sigma2, theta, a2) under the MA(1) residual-noise likelihood.

    ``noise_space`` selects the admissible noise-variance interval, see
    the module docstring.  ``start`` optionally warm-starts the search
    from a (sigma2, theta, a2) triple.  Raises ``NoConvergence``
    (carrying the best iterate) when the optimizer exhausts its budget
    without settling and ``BoundarySolution`` when every coordinate ends
    up pinned.
    """
    if noise_space not in (SMALL_TEST, LARGE_NOISE):
        raise ValueError(f"unknown noise space {noise_space!r}")
    y = returns(series)
    model.check_covariates(series.covariates)
    theta0, _ = _least_squares_theta(model, series, y.values)
    resid0 = y.values - mu(model, series, theta0) if model.dim else y.values

    if noise_space == LARGE_NOISE:
        a_lo, a_hi = bounds.a2_min, bounds.a2_max
    else:
        sigma2_guess, _ = _starting_values(resid0, y.mean_spacing, bounds, 0.0, bounds.a2_max)
        a_lo = -sigma2_guess * y.mean_spacing / bounds.small_test_margin
        a_hi = bounds.a2_max
    sigma2_0, a2_0 = _starting_values(resid0, y.mean_spacing, bounds, a_lo, a_hi)
    a2_0 = min(max(a2_0, a_lo), a_hi)
    if start is not None:
        s0, t0, a0 = start
        sigma2_0 = min(max(float(s0), bounds.sigma2_min), bounds.sigma2_max)
        theta0 = model.check_theta(t0) if model.dim else np.empty(0)
        a2_0 = min(max(float(a0), a_lo), a_hi)

    x0 = np.concatenate([[sigma2_0], theta0, [a2_0]])
    x_lo = np.concatenate(
        [[bounds.sigma2_min], model.theta_bounds[:, 0], [a_lo]]
    )
    x_hi = np.concatenate(
        [[bounds.sigma2_max], model.theta_bounds[:, 1], [a_hi]]
    )
    theta_scale = np.maximum(
        np.abs(theta0), (model.theta_bounds[:, 1] - model.theta_bounds[:, 0]) / 200.0
    )
    a_scale = max(abs(a2_0), abs(a_lo) / 2.0, bounds.a2_min * 10.0)
    scale = np.concatenate([[sigma2_0], theta_scale, [a_scale]])

    obj = _ErrObjective(
        model,
        series,
        y,
        z_lo=(x_lo - x0) / scale,
        z_hi=(x_hi - x0) / scale,
        origin=x0,
        scale=scale,
    )
    use_simplex = model.dim <= 2
    maxiter = 400 * (model.dim + 2)

    def solve_from(z_start):
        return _run_err_optimizer(obj, z_start, use_simplex, maxiter)

    z, iterations, converged = solve_from(np.zeros_like(x0))
    x = obj.to_x(z)
    hit = _pinned(x, x_lo, x_hi, scale)
    if hit:
        # multi-start: two perturbed restarts, keep the best likelihood
        best = (obj.value_x(x), z, iterations, converged)
        rng = np.random.default_rng(7)
        for _ in range(2):
            z_try = np.clip(
                rng.uniform(-0.8, 0.8, size=len(x0)), obj.z_lo, obj.z_hi
            )
            z2, it2, conv2 = solve_from(z_try)
            val2 = obj.value_x(obj.to_x(z2))
            iterations += it2
            if val2 < best[0]:
                best = (val2, z2, iterations, conv2)
        _, z, iterations, converged = best
        x = obj.to_x(z)
        hit = _pinned(x, x_lo, x_hi, scale)

    sigma2, theta, a2 = obj.unpack(x)
    loglik = -obj.value_x(x)
    names = ["sigma2"] + [f"theta[{j}]" for j in range(model.dim)] + ["a2"]
    result = FitResult(
        variant="err" if model.dim else "null",
        sigma2=float(sigma2),
        theta=theta.copy() if model.dim else None,
        a2=float(a2),
        loglik=float(loglik),
        iterations=iterations,
        converged=converged,
        bounds_hit=tuple(names[i] for i in hit),
        n_obs=len(resid0),
    )
    if len(hit) == len(x):
        raise BoundarySolution("all coordinates pinned at their bounds", result)
    if not converged:
        raise NoConvergence("optimizer exhausted its budget", result)
    return result


def _pinned(x, lo, hi, scale):
    eps = 1e-9 * scale
    out = []
    for i in range(len(x)):
        if x[i] <= lo[i] + eps[i] or x[i] >= hi[i] - eps[i]:
            out.append(i)
    return out


def fit_null(
    series: TickSeries,
    bounds: FitBounds = DEFAULT_BOUNDS,
    noise_space: str = SMALL_TEST,
) -> FitResult:
    """No-information QMLE: MA(1) likelihood with a null offset model."""
    from .models import make_model

    return fit_err(series, make_model("null"), bounds, noise_space)


def efficient_price(series: TickSeries, model: NoiseModel, theta_hat) -> EfficientPricePath:
    """Observed price minus the fitted offset, at every tick."""
    values = series.prices - phi_path(model, series, theta_hat)
    return EfficientPricePath(times=series.times.copy(), values=values)


def e_qmle(
    series: TickSeries,
    model: NoiseModel,
    bounds: FitBounds = DEFAULT_BOUNDS,
    noise_space: str = SMALL_TEST,
) -> FitResult:
    """Two-step estimator: offset removal first, no-information QMLE second."""
    fe = fit_exp(series, model, bounds)
    path = efficient_price(series, model, fe.theta)
    cleaned = TickSeries(
        times=path.times, prices=path.values, covariates={}, horizon=series.horizon
    )
    return fit_null(cleaned, bounds, noise_space)


def pi_v_hat(series: TickSeries, model: NoiseModel, fit: FitResult) -> float:
    """Fraction of the noise variance explained by the fitted offset.

    Uses the residual-noise fit; a negative fitted noise variance is
    clamped to zero.  Raises ``Undefined`` when both the offset and the
    noise variance vanish.
    """
    if fit.variant not in ("err", "null"):
        raise ValueError("pi_v_hat needs a residual-noise fit")
    if fit.a2 is None:
        raise ValueError("fit carries no noise variance")
    theta = fit.theta if fit.theta is not None else np.empty(0)
    offsets = phi_path(model, series, theta)
    mean_sq = float(offsets @ offsets) / len(offsets)
    a2 = max(fit.a2, 0.0)
    denom = mean_sq + a2
    if denom == 0.0:
        raise Undefined("offset and noise variance are both zero")
    return mean_sq / denom
