import numpy as np
import pytest

from lobnoise.data import ReturnSeries, TickSeries, prices_from_returns, returns, validate
from lobnoise.errors import InsufficientData


def test_returns_constant_price():
    s = TickSeries(times=[0.0, 0.5, 1.0], prices=[0.0, 0.0, 0.0], horizon=1.0)
    r = returns(s)
    assert np.allclose(r.values, [0.0, 0.0])
    assert r.mean_spacing == 0.5


def test_returns_arithmetic():
    s = TickSeries(times=[0.0, 0.4, 1.0], prices=[1.0, 1.5, 1.2], horizon=1.0)
    assert np.allclose(returns(s).values, [0.5, -0.3])


def test_returns_one_second_day():
    n = 23400
    horizon = 1.0 / 252.0
    s = TickSeries(
        times=np.linspace(0.0, horizon, n + 1),
        prices=np.zeros(n + 1),
        horizon=horizon,
    )
    assert returns(s).mean_spacing == pytest.approx(horizon / n, rel=1e-15)


def test_too_few_observations():
    with pytest.raises(InsufficientData):
        TickSeries(times=[0.0], prices=[1.0], horizon=1.0)


def test_validate_clean(rng, make_roll_series):
    assert validate(make_roll_series(rng, n=50)) == []


def test_validate_nonmonotone_time():
    s = TickSeries(times=[0.0, 2.0, 1.0], prices=[0.0, 0.1, 0.2], horizon=3.0)
    assert "NonMonotoneTime@2" in validate(s)


def test_validate_bad_trade_sign():
    s = TickSeries(
        times=[0.0, 1.0, 2.0],
        prices=[0.0, 0.1, 0.2],
        covariates={"I": [1.0, 0.0, -1.0]},
        horizon=3.0,
    )
    assert "InvalidTradeSign@1" in validate(s)


def test_validate_covariate_length():
    s = TickSeries(
        times=[0.0, 1.0, 2.0],
        prices=[0.0, 0.1, 0.2],
        covariates={"S": [1e-4, 1e-4]},
        horizon=3.0,
    )
    assert any(v.startswith("CovariateLengthMismatch@S") for v in validate(s))


def test_round_trip(rng):
    prices = np.cumsum(rng.standard_normal(200)) * 1e-3
    s = TickSeries(times=np.linspace(0, 1, 200), prices=prices, horizon=1.0)
    r = returns(s)
    rebuilt = prices_from_returns(prices[0], r)
    assert np.max(np.abs(rebuilt - prices)) < 1e-12
    # sum of returns telescopes
    assert np.sum(r.values) == pytest.approx(prices[-1] - prices[0], rel=1e-12, abs=1e-15)


def test_immutable():
    s = TickSeries(times=[0.0, 1.0], prices=[0.0, 0.1], horizon=1.0)
    with pytest.raises(AttributeError):
        s.horizon = 2.0


def test_return_series_requires_positive_spacing():
    with pytest.raises(ValueError):
        ReturnSeries(values=[0.1], mean_spacing=0.0)
