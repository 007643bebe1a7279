"""Gaussian quasi-likelihoods and the MA(1) tridiagonal Toeplitz algebra.

The return covariance under an MA(1) residual-noise model is the N x N
tridiagonal Toeplitz matrix with diagonal s + 2*a2 and off-diagonal -a2,
where s is the per-return diffusion mass sigma^2 * Delta_N.  Everything
here evaluates in O(N): the quadratic form through a symmetric
tridiagonal LDL^T solve and the log-determinant through the classical
three-term minor recursion, rescaled periodically so it neither
overflows nor underflows.  A closed form for the inverse entries is kept
as an O(1)-per-entry oracle for testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import TickSeries, returns
from .errors import IndefiniteKernel
from .models import NoiseModel, mu

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    def njit(*args, **kwargs):
        def wrap(func):
            return func
        return wrap if not (args and callable(args[0])) else args[0]

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class MA1Kernel:
    """Tridiagonal Toeplitz covariance of N observed returns.

    Parameters
    ----------
    n : int
        Matrix size N.
    s : float
        Diagonal diffusion mass sigma^2 * Delta_N (per-return variance).
    a2 : float
        Noise variance.  May be negative on the extended testing space,
        subject to ``|a2| < s/4`` so the matrix stays positive definite.

    The moving-average reparameterization (phi_tilde, gamma2) satisfies
    ``gamma2 * (1 - phi_tilde)**2 == s`` and ``gamma2 * phi_tilde == a2``;
    by convention phi_tilde = 0 when a2 = 0.
    """

    n: int
    s: float
    a2: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("kernel size must be at least 1")
        if self.s <= 0:
            raise IndefiniteKernel(f"diffusion mass s={self.s} must be positive")
        if self.a2 < 0 and not 4.0 * abs(self.a2) < self.s:
            raise IndefiniteKernel(
                f"negative a2={self.a2} needs |a2| < s/4 = {self.s / 4}"
            )

    @property
    def phi_tilde(self) -> float:
        # 1 - (sqrt(s*(4*a2+s)) - s)/(2*a2), written in a form that is
        # stable as a2 -> 0 and valid for negative a2 (4*a2/s > -1).
        if self.a2 == 0.0:
            return 0.0
        return 1.0 - 2.0 / (1.0 + math.sqrt(1.0 + 4.0 * self.a2 / self.s))

    @property
    def gamma2(self) -> float:
        return 0.5 * (
            2.0 * self.a2 + self.s + math.sqrt(self.s * (4.0 * self.a2 + self.s))
        )

    @property
    def diag(self) -> float:
        return self.s + 2.0 * self.a2

    @property
    def off(self) -> float:
        return -self.a2


def omega_inv_coeff(kernel: MA1Kernel, i: int, j: int) -> float:
    """Entry (i, j) of the inverse covariance, 1-based indices.

    Uses the closed form in the moving-average parameters; for a2 = 0
    the matrix is diagonal and the entry is ``delta_ij / s``.
    """
    n = kernel.n
    if not (1 <= i <= n and 1 <= j <= n):
        raise IndexError(f"indices ({i}, {j}) outside 1..{n}")
    if kernel.a2 == 0.0:
        return (1.0 / kernel.s) if i == j else 0.0
    p = kernel.phi_tilde
    g2 = kernel.gamma2
    num = (
        p ** abs(i - j)
        - p ** (i + j)
        - p ** (2 * n - i - j + 2)
        + p ** (2 * n - abs(i - j) + 2)
    )
    den = g2 * (1.0 - p * p) * (1.0 - p ** (2 * n + 2))
    return num / den


@njit(cache=True)
def _ldlt_quadform(n, diag, off, v):
    """v' Omega^{-1} v via LDL^T; returns nan on pivot breakdown."""
    delta = diag
    if delta <= 0.0:
        return np.nan
    z = v[0]
    quad = z * z / delta
    for i in range(1, n):
        lo = off / delta
        delta = diag - off * lo
        if delta <= 0.0:
            return np.nan
        z = v[i] - lo * z
        quad += z * z / delta
    return quad


@njit(cache=True)
def _ldlt_quad_logdet(n, diag, off, v):
    """One-pass LDL^T giving (v' Omega^{-1} v, log det Omega).

    Returns (nan, nan) on pivot breakdown.  Used by the likelihood hot
    path; the public quadform/logdet entry points keep their own
    single-purpose algorithms.
    """
    delta = diag
    if delta <= 0.0:
        return np.nan, np.nan
    z = v[0]
    quad = z * z / delta
    ld = np.log(delta)
    for i in range(1, n):
        lo = off / delta
        delta = diag - off * lo
        if delta <= 0.0:
            return np.nan, np.nan
        z = v[i] - lo * z
        quad += z * z / delta
        ld += np.log(delta)
    return quad, ld


@njit(cache=True)
def _minor_recursion_logdet(n, diag, a2):
    """log det via d_k = diag*d_{k-1} - a2^2*d_{k-2}, in log-scaled form.

    The minors are carried normalized by diag**k (their per-step growth
    factor, extracted analytically) and the remaining mantissa has its
    exponent pulled out every 64 steps; for admissible kernels the
    per-step mantissa ratio lies in [1/2, 1], so no intermediate value
    can overflow or underflow.  Returns nan when a leading principal
    minor fails to be positive.
    """
    if diag <= 0.0:
        return np.nan
    q = (a2 * a2) / (diag * diag)
    log_scale = n * np.log(diag)
    e_prev2 = 1.0  # d_0 / diag^0
    e_prev = 1.0  # d_1 / diag^1
    for k in range(2, n + 1):
        e = e_prev - q * e_prev2
        if e <= 0.0:
            return np.nan
        e_prev2 = e_prev
        e_prev = e
        if k % 64 == 0:
            m = e_prev
            log_scale += np.log(m)
            e_prev = 1.0
            e_prev2 /= m
    return np.log(e_prev) + log_scale


def quadform(kernel: MA1Kernel, v) -> float:
    """Quadratic form v' Omega^{-1} v, O(N) symmetric tridiagonal solve."""
    v = np.ascontiguousarray(v, dtype=float)
    if len(v) != kernel.n:
        raise ValueError(f"vector length {len(v)} != kernel size {kernel.n}")
    if kernel.a2 == 0.0:
        return float(v @ v) / kernel.s
    out = _ldlt_quadform(kernel.n, kernel.diag, kernel.off, v)
    if np.isnan(out):
        raise IndefiniteKernel(
            f"pivot breakdown for s={kernel.s}, a2={kernel.a2}, n={kernel.n}"
        )
    return float(out)


def logdet(kernel: MA1Kernel) -> float:
    """Log-determinant of the kernel via the scaled minor recursion."""
    if kernel.a2 == 0.0:
        return kernel.n * math.log(kernel.s)
    out = _minor_recursion_logdet(kernel.n, kernel.diag, kernel.a2)
    if np.isnan(out):
        raise IndefiniteKernel(
            f"non-positive minor for s={kernel.s}, a2={kernel.a2}, n={kernel.n}"
        )
    return float(out)


def _loglik_exp_core(resid: np.ndarray, sigma2: float, spacing: float) -> float:
    n = len(resid)
    s = sigma2 * spacing
    return -0.5 * n * math.log(s) - 0.5 * n * LOG_2PI - float(resid @ resid) / (2.0 * s)


def _loglik_err_core(resid: np.ndarray, sigma2: float, a2: float, spacing: float) -> float:
    n = len(resid)
    kernel = MA1Kernel(n=n, s=sigma2 * spacing, a2=a2)
    if kernel.a2 == 0.0:
        return _loglik_exp_core(resid, sigma2, spacing)
    resid = np.ascontiguousarray(resid, dtype=float)
    quad, ld = _ldlt_quad_logdet(n, kernel.diag, kernel.off, resid)
    if np.isnan(quad):
        raise IndefiniteKernel(
            f"pivot breakdown for s={kernel.s}, a2={kernel.a2}, n={n}"
        )
    return -0.5 * ld - 0.5 * n * LOG_2PI - 0.5 * quad


def loglik_exp(series: TickSeries, model: NoiseModel, sigma2: float, theta) -> float:
    """Log-likelihood of returns with no residual noise (diagonal model)."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    y = returns(series)
    resid = y.values - mu(model, series, theta)
    return _loglik_exp_core(resid, sigma2, y.mean_spacing)


def loglik_err(
    series: TickSeries, model: NoiseModel, sigma2: float, theta, a2: float
) -> float:
    """Log-likelihood of returns under MA(1) residual noise."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    y = returns(series)
    resid = y.values - mu(model, series, theta)
    return _loglik_err_core(resid, sigma2, a2, y.mean_spacing)


def build_dot_matrix(a: np.ndarray) -> np.ndarray:
    """Row-difference transform: (N+1) x N matrix of a_{i+1,j} - a_{i,j}.

    Rows are indexed 0..N and columns 1..N, with the zero-extension
    convention a_{i,j} = 0 outside 1..N.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    padded = np.zeros((n + 2, n))
    padded[1 : n + 1, :] = a
    return padded[1:, :] - padded[:-1, :]


def build_ddot_matrix(a: np.ndarray) -> np.ndarray:
    """Second difference transform: (N+1) x (N+1), both indices shifted."""
    dot = build_dot_matrix(a)
    n = a.shape[0]
    padded = np.zeros((n + 1, n + 2))
    padded[:, 1 : n + 1] = dot
    return padded[:, 1:] - padded[:, :-1]


def bypart_transform(a: np.ndarray, y, z) -> float:
    """Summation-by-parts value y' A-double-dot z.

    For vectors y, z of length N+1 and an N x N coefficient matrix A this
    equals (Dy)' A (Dz) with D the first-difference operator; the
    identity is exercised by the test-suite oracles.
    """
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("coefficient matrix must be square")
    if len(y) != n + 1 or len(z) != n + 1:
        raise ValueError("vectors must have length N+1")
    return float(y @ build_ddot_matrix(a) @ z)


def dense_omega(kernel: MA1Kernel) -> np.ndarray:
    """Materialize the full covariance matrix (testing helper)."""
    n = kernel.n
    out = np.zeros((n, n))
    np.fill_diagonal(out, kernel.diag)
    idx = np.arange(n - 1)
    out[idx, idx + 1] = kernel.off
    out[idx + 1, idx] = kernel.off
    return out
