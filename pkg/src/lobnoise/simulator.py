"""Synthetic market generator: efficient price, arrival times, LOB
information and residual noise.

The efficient log-price follows a square-root stochastic-variance model
multiplied by a deterministic U-shaped intraday factor that takes one
downward jump at a uniform time, plus rare symmetric price jumps.  The
variance process is discretized with a full-truncation Euler scheme on a
grid at least ten times finer than the observation grid (the latent path
is simulated on the union of both grids, so observations never need
interpolation).  Arrival times are either regular or drawn from an
intensity with the usual U-shaped intraday profile.

Identical seed and configuration produce bit-identical output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import signal

from .data import TickSeries
from .models import make_model, phi_path

try:
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        def wrap(func):
            return func
        return wrap if not (args and callable(args[0])) else args[0]

#: Trading seconds per session; one second is horizon / SECONDS_PER_DAY.
SECONDS_PER_DAY = 23400
DEFAULT_HORIZON = 1.0 / 252.0

H0 = "H0"
H1 = "H1"
H2 = "H2"

REGULAR = "regular"
IRREGULAR = "irregular"


@dataclass(frozen=True)
class PriceConfig:
    """Drift and jump layer of the efficient price."""

    drift: float = 0.03
    enable_jumps: bool = True
    #: mean number of price jumps per session
    expected_jumps: float = 1.0
    #: absolute log-price jump size; None picks sqrt(horizon * sv.level),
    #: which makes the expected jump share of quadratic variation ~ 1/2
    jump_size: Optional[float] = None


@dataclass(frozen=True)
class SeasonalityConfig:
    """Deterministic U-shape factor with one downward jump."""

    enabled: bool = True
    base: float = 0.75
    open_amp: float = 0.25
    close_amp: float = 0.89
    open_rate: float = 10.0
    close_rate: float = 10.0
    #: relative size of the single downward jump at tau ~ U[0, T]
    jump_frac: float = 0.5
    jump_enabled: bool = True


@dataclass(frozen=True)
class StochVolConfig:
    """Square-root variance dynamics; disabled means constant variance."""

    enabled: bool = True
    mean_reversion: float = 5.0
    level: float = 0.1
    vol_of_vol: float = 0.4
    leverage: float = -0.75
    stationary_init: bool = True

    def feller_ratio(self) -> float:
        """2*kappa*level / vol_of_vol^2; above 1 keeps the variance positive."""
        return 2.0 * self.mean_reversion * self.level / self.vol_of_vol**2


@dataclass(frozen=True)
class TimesConfig:
    """Observation grid: regular spacing or U-shaped random arrivals."""

    mode: str = REGULAR
    n: int = SECONDS_PER_DAY
    beta1: float = -0.84
    beta2: float = -0.26
    beta3: float = -0.39
    #: irregular mode scales the base step to horizon / (rate * n); the
    #: exponential waiting times have unit mean
    rate: float = 2.0


@dataclass(frozen=True)
class InfoConfig:
    """LOB covariate generator tied to a noise model."""

    model: str = "roll"
    theta0: tuple = (0.0001,)
    sign_autocorr: float = 0.3
    spread_mean: float = 0.000125
    spread_var: float = 1e-10
    spread_corr: float = 0.6
    volume_mean: float = 100.0
    volume_log_sd: float = 0.5
    depth_mean: float = 500.0
    depth_log_sd: float = 0.5
    ofi_sd: float = 100.0


@dataclass(frozen=True)
class NoiseConfig:
    """Residual noise regime: none, i.i.d. Gaussian, or endogenous.

    The endogenous regime couples each tick's noise to the local
    direction of the latent price over the trailing
    ``endo_window_seconds`` window.  Coupling to the full
    inter-observation return instead would make the endogeneity term
    grow like sqrt(spacing) and swamp the noise variance at sparse
    sampling frequencies; a fixed sub-second window keeps the coupling
    scale frequency-invariant.
    """

    regime: str = H0
    a0_sq: float = 0.0
    endo_window_seconds: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete simulator specification."""

    price: PriceConfig = field(default_factory=PriceConfig)
    seasonality: SeasonalityConfig = field(default_factory=SeasonalityConfig)
    sv: StochVolConfig = field(default_factory=StochVolConfig)
    times: TimesConfig = field(default_factory=TimesConfig)
    info: InfoConfig = field(default_factory=InfoConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    horizon: float = DEFAULT_HORIZON
    fine_factor: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.fine_factor < 1:
            raise ValueError("fine_factor must be at least 1")
        if self.sv.level <= 0 or self.sv.vol_of_vol <= 0:
            raise ValueError("variance parameters must be positive")
        if not -1.0 < self.info.sign_autocorr < 1.0:
            raise ValueError("sign autocorrelation must lie in (-1, 1)")
        if not -1.0 < self.info.spread_corr < 1.0:
            raise ValueError("spread correlation must lie in (-1, 1)")
        if self.noise.regime not in (H0, H1, H2):
            raise ValueError("noise regime must be H0, H1 or H2")
        if self.times.mode not in (REGULAR, IRREGULAR):
            raise ValueError("times mode must be 'regular' or 'irregular'")


@dataclass(frozen=True)
class GroundTruth:
    """Latent quantities stored for oracle checks."""

    integrated_variance: float
    jump_squares: float
    quadratic_variation: float
    sigma2_bar: float
    integrated_quarticity: float
    quarticity_q: float
    mean_inv_intensity: float
    jump_times: np.ndarray
    theta0: np.ndarray
    noise_variance: float
    efficient_prices: np.ndarray
    noise: np.ndarray
    min_spot_variance: float = 0.0


def arrival_intensity_inverse(t, times_cfg: TimesConfig, horizon: float):
    """Deterministic spacing multiplier alpha_t (inverse arrival rate)."""
    e1 = math.exp(times_cfg.beta1)
    e2 = math.exp(times_cfg.beta2)
    e3 = math.exp(times_cfg.beta3)
    u = np.asarray(t, dtype=float) / horizon
    return 1.0 / (e1 + (e2 + e3) ** 2 * (u - e2 / (e2 + e3)) ** 2)


@njit(cache=True)
def _draw_arrivals(step, horizon, e1, e2, e3, waits):
    out = np.empty(len(waits) + 1)
    out[0] = 0.0
    t = 0.0
    count = 0
    center = e2 / (e2 + e3)
    width = (e2 + e3) ** 2
    for i in range(len(waits)):
        u = t / horizon
        alpha = 1.0 / (e1 + width * (u - center) ** 2)
        t = t + step * alpha * waits[i]
        if t > horizon:
            break
        count += 1
        out[count] = t
    return out[: count + 1]


def simulate_times(times_cfg: TimesConfig, horizon: float, rng) -> np.ndarray:
    """Observation grid on [0, horizon], starting at 0."""
    if times_cfg.mode == REGULAR:
        return np.linspace(0.0, horizon, times_cfg.n + 1)
    budget = int(times_cfg.rate * times_cfg.n * 2.5) + 64
    waits = rng.exponential(1.0, size=budget)
    step = horizon / (times_cfg.rate * times_cfg.n)
    grid = _draw_arrivals(
        step,
        horizon,
        math.exp(times_cfg.beta1),
        math.exp(times_cfg.beta2),
        math.exp(times_cfg.beta3),
        waits,
    )
    if len(grid) < 2:
        raise ValueError("arrival simulation produced fewer than 2 ticks")
    return grid


def seasonal_sigma(t, cfg: SeasonalityConfig, horizon: float, tau: float):
    """U-shape volatility factor with its downward jump at tau."""
    if not cfg.enabled:
        return np.ones_like(np.asarray(t, dtype=float))
    t = np.asarray(t, dtype=float)
    u = t / horizon
    base = cfg.base + cfg.open_amp * np.exp(-cfg.open_rate * u)
    base = base + cfg.close_amp * np.exp(-cfg.close_rate * (1.0 - u))
    if cfg.jump_enabled:
        utau = tau / horizon
        pre_jump = (
            cfg.base
            + cfg.open_amp * math.exp(-cfg.open_rate * utau)
            + cfg.close_amp * math.exp(-cfg.close_rate * (1.0 - utau))
        )
        base = base - cfg.jump_frac * pre_jump * (t >= tau)
    return base


@njit(cache=True)
def _latent_path(
    dts,
    season,
    v0,
    kappa,
    level,
    vol_of_vol,
    leverage,
    sv_enabled,
    drift,
    z_price,
    z_indep,
    jump_increments,
    variance_floor,
):
    """Joint variance / log-price path on a variable-spacing grid.

    Returns per-node spot variance (floored) and log-price, plus the
    integrated variance and quarticity accumulated with left endpoints.
    """
    m = len(dts)
    var_path = np.empty(m + 1)
    x_path = np.empty(m + 1)
    v = v0
    x = 0.0
    iv = 0.0
    iq = 0.0
    root1m = math.sqrt(max(1.0 - leverage * leverage, 0.0))
    for k in range(m):
        vp = v if v > 0.0 else 0.0
        spot = vp if vp > variance_floor else variance_floor
        sigma2 = spot * season[k] * season[k]
        var_path[k] = spot
        sq = math.sqrt(dts[k])
        x_path[k] = x
        iv += sigma2 * dts[k]
        iq += sigma2 * sigma2 * dts[k]
        x = x + drift * dts[k] + math.sqrt(sigma2) * sq * z_price[k]
        x += jump_increments[k]
        if sv_enabled:
            zv = leverage * z_price[k] + root1m * z_indep[k]
            v = v + kappa * (level - vp) * dts[k] + vol_of_vol * math.sqrt(vp) * sq * zv
    var_path[m] = v if v > variance_floor else variance_floor
    x_path[m] = x
    return var_path, x_path, iv, iq


def simulate_info(info_cfg: InfoConfig, n_ticks: int, rng) -> dict:
    """Per-tick LOB covariates required by the configured noise model.

    Trade signs follow a symmetric two-state Markov chain whose
    stay-probability (1 + rho)/2 yields lag-one autocorrelation rho; the
    spread is a Gaussian AR(1) with the stated stationary moments,
    floored at 1e-9.  Trade signs are always generated (the endogenous
    noise regime needs them); other variables only when the model reads
    them.
    """
    if n_ticks < 1:
        raise ValueError("need at least one tick")
    model = make_model(info_cfg.model)
    needed = set(model.required_covariates)
    cov = {}

    stay = 0.5 * (1.0 + info_cfg.sign_autocorr)
    first = 1.0 if rng.random() < 0.5 else -1.0
    flips = np.where(rng.random(n_ticks - 1) < stay, 1.0, -1.0)
    signs = np.empty(n_ticks)
    signs[0] = first
    if n_ticks > 1:
        signs[1:] = first * np.cumprod(flips)
    cov["I"] = signs

    if "S" in needed:
        sd = math.sqrt(info_cfg.spread_var)
        innov_sd = sd * math.sqrt(1.0 - info_cfg.spread_corr**2)
        e = rng.standard_normal(n_ticks) * innov_sd
        x0 = rng.standard_normal() * sd
        centered, _ = signal.lfilter(
            [1.0],
            [1.0, -info_cfg.spread_corr],
            e,
            zi=np.array([info_cfg.spread_corr * x0]),
        )
        cov["S"] = np.maximum(info_cfg.spread_mean + centered, 1e-9)
    if "V" in needed:
        cov["V"] = info_cfg.volume_mean * rng.lognormal(
            -0.5 * info_cfg.volume_log_sd**2, info_cfg.volume_log_sd, n_ticks
        )
    if "QD" in needed:
        cov["QD"] = info_cfg.depth_mean * rng.lognormal(
            -0.5 * info_cfg.depth_log_sd**2, info_cfg.depth_log_sd, n_ticks
        )
    if "OFI" in needed:
        cov["OFI"] = rng.normal(0.0, info_cfg.ofi_sd, n_ticks)
    return cov


def simulate_noise(noise_cfg: NoiseConfig, signs, dx, rng) -> np.ndarray:
    """Residual noise at each tick under the configured regime.

    ``dx`` carries one local efficient-price increment per tick (the
    trailing-window increments supplied by the scenario driver); only
    its sign enters.  A tick with an empty window (the session open)
    reuses the next tick's direction.
    """
    n_ticks = len(signs)
    if noise_cfg.regime == H0:
        return np.zeros(n_ticks)
    a0 = math.sqrt(noise_cfg.a0_sq)
    if noise_cfg.regime == H1:
        return rng.normal(0.0, a0, n_ticks)
    dx = np.asarray(dx, dtype=float)
    if len(dx) == n_ticks - 1:
        # per-return increments: tick 0 has none, reuse the first
        full = np.empty(n_ticks)
        full[1:] = dx
        full[0] = dx[0] if len(dx) else 1.0
        dx = full
    elif len(dx) != n_ticks:
        raise ValueError("need a local increment per tick (or per return)")
    sgn = np.sign(dx)
    zeros = np.nonzero(sgn == 0.0)[0]
    for i in zeros:
        if i + 1 < n_ticks and sgn[i + 1] != 0.0:
            sgn[i] = sgn[i + 1]
        elif i > 0:
            sgn[i] = sgn[i - 1]
        else:
            sgn[i] = 1.0
    z = rng.standard_normal((4, n_ticks))
    nu = noise_cfg.a0_sq
    scale = a0 / math.sqrt(3.0) + nu * z[0]
    return scale * (sgn * np.abs(z[1]) + signs * np.abs(z[2]) + z[3])


def _jump_layer(price_cfg: PriceConfig, sv_level, horizon, all_times, rng):
    """Compound-Poisson increments aligned with the latent grid."""
    m = len(all_times) - 1
    increments = np.zeros(m)
    if not price_cfg.enable_jumps:
        return increments, np.empty(0), np.empty(0)
    count = rng.poisson(price_cfg.expected_jumps)
    size = (
        price_cfg.jump_size
        if price_cfg.jump_size is not None
        else math.sqrt(horizon * sv_level)
    )
    if count == 0:
        return increments, np.empty(0), np.empty(0)
    jt = np.sort(rng.uniform(0.0, horizon, count))
    sizes = size * np.where(rng.random(count) < 0.5, 1.0, -1.0)
    cells = np.searchsorted(all_times, jt, side="left") - 1
    cells = np.clip(cells, 0, m - 1)
    for c, s in zip(cells, sizes):
        increments[c] += s
    return increments, jt, sizes


def simulate_scenario(cfg: ScenarioConfig):
    """Generate one session of observed prices plus its ground truth.

    Returns ``(TickSeries, GroundTruth)`` where the observed log-price is
    the latent price plus the configured offset and residual noise.
    """
    rng = np.random.default_rng(cfg.seed)
    horizon = cfg.horizon

    obs_times = simulate_times(cfg.times, horizon, rng)
    tau = rng.uniform(0.0, horizon)

    n_fine = cfg.fine_factor * max(
        cfg.times.n if cfg.times.mode == REGULAR else int(cfg.times.rate * cfg.times.n),
        len(obs_times) - 1,
    )
    fine = np.linspace(0.0, horizon, n_fine + 1)
    pieces = [fine, obs_times]
    if cfg.noise.regime == H2:
        window = cfg.noise.endo_window_seconds * horizon / SECONDS_PER_DAY
        pieces.append(np.maximum(obs_times - window, 0.0))
    all_times = np.union1d(np.concatenate(pieces), np.empty(0))
    dts = np.diff(all_times)
    m = len(dts)

    if cfg.sv.enabled and cfg.sv.stationary_init:
        shape = cfg.sv.feller_ratio()
        v0 = rng.gamma(shape, cfg.sv.level / shape)
    else:
        v0 = cfg.sv.level
    z_price = rng.standard_normal(m)
    z_indep = rng.standard_normal(m)
    jump_increments, jump_times, jump_sizes = _jump_layer(
        cfg.price, cfg.sv.level, horizon, all_times, rng
    )

    season = seasonal_sigma(all_times[:-1], cfg.seasonality, horizon, tau)
    var_path, x_path, iv, iq = _latent_path(
        dts,
        np.ascontiguousarray(season, dtype=float),
        v0,
        cfg.sv.mean_reversion,
        cfg.sv.level,
        cfg.sv.vol_of_vol,
        cfg.sv.leverage,
        cfg.sv.enabled,
        cfg.price.drift,
        z_price,
        z_indep,
        jump_increments,
        1e-10 * cfg.sv.level,
    )

    obs_idx = np.searchsorted(all_times, obs_times)
    x_obs = x_path[obs_idx]

    n_ticks = len(obs_times)
    cov = simulate_info(cfg.info, n_ticks, rng)
    if "D" in make_model(cfg.info.model).required_covariates:
        d = np.empty(n_ticks)
        d[1:] = np.diff(obs_times)
        d[0] = d[1] if n_ticks > 1 else horizon / cfg.times.n
        cov["D"] = d

    model = make_model(cfg.info.model)
    theta0 = np.asarray(cfg.info.theta0, dtype=float)
    if cfg.noise.regime == H2:
        window = cfg.noise.endo_window_seconds * horizon / SECONDS_PER_DAY
        q_idx = np.searchsorted(all_times, np.maximum(obs_times - window, 0.0))
        dx_local = x_path[obs_idx] - x_path[q_idx]
    else:
        dx_local = np.diff(x_obs)
    eps = simulate_noise(cfg.noise, cov["I"], dx_local, rng)

    series = TickSeries(
        times=obs_times,
        prices=x_obs
        + (phi_path(model, TickSeries(obs_times, x_obs, cov, horizon), theta0))
        + eps,
        covariates=cov,
        horizon=horizon,
    )

    jump_sq = float(np.sum(jump_sizes**2))
    if cfg.times.mode == IRREGULAR:
        alpha = arrival_intensity_inverse(all_times[:-1], cfg.times, horizon)
    else:
        alpha = np.ones(m)
    sigma2_steps = var_path[:-1] * season**2
    mean_inv_alpha = float(np.sum(dts / alpha)) / horizon
    q_cont = float(np.sum(sigma2_steps**2 * alpha * dts))
    q_jump = 0.0
    if len(jump_times):
        cells = np.clip(np.searchsorted(all_times, jump_times, side="left") - 1, 0, m - 1)
        for c, s in zip(cells, jump_sizes):
            q_jump += s * s * 2.0 * sigma2_steps[c] * alpha[c]
    quarticity_q = mean_inv_alpha * (q_cont + q_jump)

    truth = GroundTruth(
        integrated_variance=float(iv),
        jump_squares=jump_sq,
        quadratic_variation=float(iv) + jump_sq,
        sigma2_bar=(float(iv) + jump_sq) / horizon,
        integrated_quarticity=float(iq),
        quarticity_q=float(quarticity_q),
        mean_inv_intensity=mean_inv_alpha,
        jump_times=jump_times,
        theta0=theta0,
        noise_variance=cfg.noise.a0_sq if cfg.noise.regime != H0 else 0.0,
        efficient_prices=x_obs,
        noise=eps,
        min_spot_variance=float(np.min(var_path)),
    )
    return series, truth


def constant_vol(cfg: ScenarioConfig) -> ScenarioConfig:
    """Convenience: strip every stochastic-volatility and jump feature."""
    return replace(
        cfg,
        seasonality=replace(cfg.seasonality, enabled=False),
        sv=replace(cfg.sv, enabled=False, stationary_init=False),
        price=replace(cfg.price, enable_jumps=False),
    )
