import numpy as np
import pytest

from lobnoise.data import TickSeries


@pytest.fixture
def rng():
    return np.random.default_rng(20250401)


def roll_series(rng, n=500, sigma2=0.1, theta=1e-4, a2=0.0, horizon=1.0 / 252.0):
    """Tiny hand-rolled day: Brownian diffusion + sign offset + iid noise."""
    times = np.linspace(0.0, horizon, n + 1)
    dt = horizon / n
    x = np.concatenate([[0.0], np.cumsum(rng.normal(0.0, np.sqrt(sigma2 * dt), n))])
    signs = rng.choice([-1.0, 1.0], size=n + 1)
    eps = rng.normal(0.0, np.sqrt(a2), n + 1) if a2 > 0 else np.zeros(n + 1)
    prices = x + signs * theta + eps
    return TickSeries(times=times, prices=prices, covariates={"I": signs}, horizon=horizon)


@pytest.fixture
def make_roll_series():
    return roll_series
