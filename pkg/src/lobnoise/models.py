"""Catalogue of price-offset functions driven by limit-order-book variables.

Each model maps the per-tick LOB record and a parameter vector to a price
offset.  All evaluators are stateless and thread-safe.  The catalogue:

==================  ===========================================  ===
name                offset                                       dim
==================  ===========================================  ===
null                0                                            0
roll                I * t0                                       1
glosten-harris      I * (t0 + V * t1)                            2
signed-timestamp    I * t0 / D                                   1
signed-spread       I * S * t0 / 2                               1
signed-quoted-depth I * QD * t0                                  1
order-flow          OFI * t0                                     1
nl-signed-spread    I * S * t0 / (1 + S * t0)                    1
general             I*(t0 + V t1 + t2/D + S t3 + QD t4) + OFI t5   6
==================  ===========================================  ===
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .data import TickSeries
from .errors import MissingCovariate, OutOfBounds

#: Durations are clamped below at this value (in years) before inversion,
#: so near-simultaneous ticks cannot overflow the signed-timestamp model.
MIN_DURATION = 1e-9

#: Reference tick size used to scale default boxes of level-scale parameters.
DEFAULT_TICK = 1e-4


@dataclass(frozen=True)
class NoiseModel:
    """A parametric price-offset family with its admissible parameter box.

    Attributes
    ----------
    kind : str
        Catalogue name, see module docstring.
    dim : int
        Parameter dimension d.
    required_covariates : tuple of str
        LOB variables the model reads.
    theta_bounds : ndarray, shape (d, 2)
        Compact box; column 0 lower, column 1 upper.
    """

    kind: str
    dim: int
    required_covariates: tuple
    theta_bounds: np.ndarray

    def __post_init__(self):
        bounds = np.asarray(self.theta_bounds, dtype=float).reshape(self.dim, 2)
        if self.dim and not np.all(bounds[:, 1] > bounds[:, 0]):
            raise ValueError("theta_bounds must have positive volume")
        object.__setattr__(self, "theta_bounds", bounds)

    def check_theta(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.dim,):
            raise OutOfBounds(
                f"{self.kind} expects {self.dim} parameters, got {theta.shape}"
            )
        if self.dim and (
            np.any(theta < self.theta_bounds[:, 0] - 1e-15)
            or np.any(theta > self.theta_bounds[:, 1] + 1e-15)
        ):
            raise OutOfBounds(f"theta {theta} outside box for {self.kind}")
        return theta

    def check_covariates(self, available) -> None:
        missing = [c for c in self.required_covariates if c not in available]
        if missing:
            raise MissingCovariate(
                f"{self.kind} needs covariates {missing} not present in the series"
            )


_T = DEFAULT_TICK


def _box(*rows):
    return np.array(rows, dtype=float)


_CATALOGUE = {
    "null": ((), _box().reshape(0, 2)),
    "roll": (("I",), _box((-10 * _T, 10 * _T))),
    "glosten-harris": (("I", "V"), _box((-10 * _T, 10 * _T), (-1e-3, 1e-3))),
    "signed-timestamp": (("I", "D"), _box((-1e-8, 1e-8))),
    "signed-spread": (("I", "S"), _box((-1.0, 1.0))),
    "signed-quoted-depth": (("I", "QD"), _box((-1e-3, 1e-3))),
    "order-flow": (("OFI",), _box((-1e-3, 1e-3))),
    "nl-signed-spread": (("I", "S"), _box((-0.9, 2.0))),
    "general": (
        ("I", "V", "D", "S", "QD", "OFI"),
        _box(
            (-10 * _T, 10 * _T),
            (-1e-3, 1e-3),
            (-1e-8, 1e-8),
            (-1.0, 1.0),
            (-1e-3, 1e-3),
            (-1e-3, 1e-3),
        ),
    ),
}

MODEL_NAMES = tuple(_CATALOGUE)


def make_model(kind: str, theta_bounds=None) -> NoiseModel:
    """Build a catalogue model, optionally overriding its parameter box."""
    key = kind.lower().replace("_", "-")
    if key not in _CATALOGUE:
        raise ValueError(f"unknown noise model {kind!r}; choose from {MODEL_NAMES}")
    required, default_bounds = _CATALOGUE[key]
    bounds = default_bounds if theta_bounds is None else np.asarray(theta_bounds, float)
    return NoiseModel(
        kind=key,
        dim=len(default_bounds),
        required_covariates=required,
        theta_bounds=bounds,
    )


def _clamped_inverse_duration(d):
    return 1.0 / np.maximum(d, MIN_DURATION)


def _phi_arrays(model: NoiseModel, cov: Mapping[str, np.ndarray], theta: np.ndarray):
    """Vectorized offset over aligned covariate arrays."""
    kind = model.kind
    if kind == "null":
        some = next(iter(cov.values()), np.zeros(1))
        return np.zeros_like(np.asarray(some, dtype=float))
    if kind == "roll":
        return cov["I"] * theta[0]
    if kind == "glosten-harris":
        return cov["I"] * (theta[0] + cov["V"] * theta[1])
    if kind == "signed-timestamp":
        return cov["I"] * _clamped_inverse_duration(cov["D"]) * theta[0]
    if kind == "signed-spread":
        return 0.5 * cov["I"] * cov["S"] * theta[0]
    if kind == "signed-quoted-depth":
        return cov["I"] * cov["QD"] * theta[0]
    if kind == "order-flow":
        return cov["OFI"] * theta[0]
    if kind == "nl-signed-spread":
        denom = 1.0 + cov["S"] * theta[0]
        if np.any(denom <= 0):
            raise OutOfBounds("nl-signed-spread requires 1 + S*theta > 0")
        return cov["I"] * cov["S"] * theta[0] / denom
    if kind == "general":
        linear = (
            theta[0]
            + cov["V"] * theta[1]
            + _clamped_inverse_duration(cov["D"]) * theta[2]
            + cov["S"] * theta[3]
            + cov["QD"] * theta[4]
        )
        return cov["I"] * linear + cov["OFI"] * theta[5]
    raise ValueError(f"unhandled model kind {kind}")


def _phi_grad_arrays(model: NoiseModel, cov: Mapping[str, np.ndarray], theta: np.ndarray):
    """Vectorized parameter gradient, shape (len, d)."""
    kind = model.kind
    if kind == "null":
        some = np.asarray(next(iter(cov.values()), np.zeros(1)), dtype=float)
        return np.zeros((len(some), 0))
    if kind == "roll":
        return np.asarray(cov["I"], dtype=float)[:, None] * 1.0
    if kind == "glosten-harris":
        i = np.asarray(cov["I"], dtype=float)
        return np.stack([i, i * cov["V"]], axis=1)
    if kind == "signed-timestamp":
        return (cov["I"] * _clamped_inverse_duration(cov["D"]))[:, None]
    if kind == "signed-spread":
        return (0.5 * cov["I"] * cov["S"])[:, None]
    if kind == "signed-quoted-depth":
        return (cov["I"] * cov["QD"])[:, None]
    if kind == "order-flow":
        return np.asarray(cov["OFI"], dtype=float)[:, None]
    if kind == "nl-signed-spread":
        denom = 1.0 + cov["S"] * theta[0]
        if np.any(denom <= 0):
            raise OutOfBounds("nl-signed-spread requires 1 + S*theta > 0")
        return (cov["I"] * cov["S"] / denom**2)[:, None]
    if kind == "general":
        i = np.asarray(cov["I"], dtype=float)
        ofi = np.asarray(cov["OFI"], dtype=float)
        return np.stack(
            [
                i,
                i * cov["V"],
                i * _clamped_inverse_duration(cov["D"]),
                i * cov["S"],
                i * cov["QD"],
                ofi,
            ],
            axis=1,
        )
    raise ValueError(f"unhandled model kind {kind}")


def _as_arrays(covariates_at_i: Mapping[str, float]):
    return {k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in covariates_at_i.items()}


def phi(model: NoiseModel, covariates_at_i: Mapping[str, float], theta) -> float:
    """Price offset of ``model`` at one tick.

    Raises ``MissingCovariate`` if a required LOB variable is absent and
    ``OutOfBounds`` if ``theta`` leaves the admissible box.
    """
    theta = model.check_theta(theta)
    model.check_covariates(covariates_at_i)
    return float(_phi_arrays(model, _as_arrays(covariates_at_i), theta)[0])


def phi_grad(model: NoiseModel, covariates_at_i: Mapping[str, float], theta) -> np.ndarray:
    """Analytic parameter gradient of :func:`phi` at one tick."""
    theta = model.check_theta(theta)
    model.check_covariates(covariates_at_i)
    return _phi_grad_arrays(model, _as_arrays(covariates_at_i), theta)[0]


def phi_path(model: NoiseModel, series: TickSeries, theta) -> np.ndarray:
    """Offset evaluated at every tick of a series, shape (N+1,)."""
    theta = model.check_theta(theta)
    model.check_covariates(series.covariates)
    cov = {k: series.covariates[k] for k in model.required_covariates}
    if not cov:
        return np.zeros(len(series.prices))
    return _phi_arrays(model, cov, theta)


def phi_grad_path(model: NoiseModel, series: TickSeries, theta) -> np.ndarray:
    """Offset gradient at every tick, shape (N+1, d)."""
    theta = model.check_theta(theta)
    model.check_covariates(series.covariates)
    cov = {k: series.covariates[k] for k in model.required_covariates}
    if not cov:
        return np.zeros((len(series.prices), 0))
    return _phi_grad_arrays(model, cov, theta)


def mu(model: NoiseModel, series: TickSeries, theta) -> np.ndarray:
    """First differences of the offset along the series, shape (N,)."""
    return np.diff(phi_path(model, series, theta))


def mu_grad(model: NoiseModel, series: TickSeries, theta) -> np.ndarray:
    """Gradient of :func:`mu` in theta, shape (N, d)."""
    return np.diff(phi_grad_path(model, series, theta), axis=0)


def is_linear(model: NoiseModel) -> bool:
    """True when the offset is linear in the parameter vector."""
    return model.kind != "nl-signed-spread"
