import numpy as np
import pytest

from lobnoise.data import TickSeries
from lobnoise.errors import MissingCovariate, OutOfBounds
from lobnoise.models import (
    MODEL_NAMES,
    is_linear,
    make_model,
    mu,
    phi,
    phi_grad,
    phi_path,
)

#: representative covariate draws for randomized checks
def _random_record(rng):
    return {
        "I": float(rng.choice([-1.0, 1.0])),
        "V": float(rng.uniform(1.0, 500.0)),
        "D": float(rng.uniform(1e-8, 1e-5)),
        "S": float(rng.uniform(5e-5, 5e-4)),
        "QD": float(rng.uniform(10.0, 1000.0)),
        "OFI": float(rng.normal(0.0, 50.0)),
    }


def _random_theta(model, rng):
    lo, hi = model.theta_bounds[:, 0], model.theta_bounds[:, 1]
    width = hi - lo
    return lo + width * rng.uniform(0.25, 0.75, size=model.dim)


def test_roll_value():
    model = make_model("roll")
    assert phi(model, {"I": 1.0}, [0.0001]) == pytest.approx(0.0001)


def test_signed_spread_value():
    model = make_model("signed-spread")
    val = phi(model, {"I": -1.0, "S": 0.000125}, [0.80])
    assert val == pytest.approx(-0.00005)


def test_zero_parameter_gives_zero_offset():
    model = make_model("roll")
    assert phi(model, {"I": 1.0}, [0.0]) == 0.0


def test_roll_gradient():
    model = make_model("roll")
    assert np.allclose(phi_grad(model, {"I": 1.0}, [1e-4]), [1.0])


def test_signed_spread_gradient():
    model = make_model("signed-spread")
    assert np.allclose(phi_grad(model, {"I": 1.0, "S": 0.0002}, [0.5]), [0.0001])


def test_nl_signed_spread_gradient_finite_difference():
    model = make_model("nl-signed-spread")
    record = {"I": 1.0, "S": 1.0}
    h = 1e-7
    fd = (phi(model, record, [1.0 + h]) - phi(model, record, [1.0 - h])) / (2 * h)
    assert fd == pytest.approx(0.25, rel=1e-6)
    assert phi_grad(model, record, [1.0])[0] == pytest.approx(0.25, rel=1e-12)


def test_mu_zero_offset():
    times = np.linspace(0, 1, 4)
    s = TickSeries(times=times, prices=np.zeros(4), covariates={"I": [1, -1, 1, -1]}, horizon=1.0)
    assert np.allclose(mu(make_model("roll"), s, [0.0]), 0.0)


def test_mu_roll_differencing():
    s = TickSeries(
        times=[0.0, 0.3, 0.7],
        prices=[0.0, 0.0, 0.0],
        covariates={"I": [1.0, -1.0, 1.0]},
        horizon=1.0,
    )
    assert np.allclose(mu(make_model("roll"), s, [0.0001]), [-0.0002, 0.0002])


def _synthetic_series(rng, n=64):
    cov = {
        "I": rng.choice([-1.0, 1.0], n),
        "V": rng.uniform(1, 500, n),
        "D": rng.uniform(1e-8, 1e-5, n),
        "S": rng.uniform(5e-5, 5e-4, n),
        "QD": rng.uniform(10, 1000, n),
        "OFI": rng.normal(0, 50, n),
    }
    return TickSeries(
        times=np.linspace(0, 1, n), prices=rng.standard_normal(n), covariates=cov, horizon=1.0
    )


def test_general_equals_sum_of_components(rng):
    s = _synthetic_series(rng)
    general = make_model("general")
    theta = np.array([1e-4, 2e-5, 3e-10, 0.3, 1e-5, 2e-5])
    combined = phi_path(general, s, theta)
    parts = (
        phi_path(make_model("roll"), s, [theta[0]])
        + phi_path(make_model("glosten-harris"), s, [0.0, theta[1]])
        + phi_path(make_model("signed-timestamp"), s, [theta[2]])
        + phi_path(make_model("signed-spread"), s, [2.0 * theta[3]])
        + phi_path(make_model("signed-quoted-depth"), s, [theta[4]])
        + phi_path(make_model("order-flow"), s, [theta[5]])
    )
    assert np.allclose(combined, parts, rtol=0, atol=0)
    assert np.allclose(
        mu(general, s, theta),
        np.diff(parts),
    )


def test_general_single_factor_exact(rng):
    s = _synthetic_series(rng)
    theta = np.zeros(6)
    theta[3] = 0.4
    general = phi_path(make_model("general"), s, theta)
    single = phi_path(make_model("signed-spread"), s, [0.8])
    assert np.array_equal(general, single)


@pytest.mark.parametrize("kind", [m for m in MODEL_NAMES if m != "null"])
def test_gradient_matches_finite_differences(kind, rng):
    model = make_model(kind)
    h = 1e-7
    for _ in range(100):
        record = _random_record(rng)
        theta = _random_theta(model, rng)
        grad = phi_grad(model, record, theta)
        for j in range(model.dim):
            up, dn = theta.copy(), theta.copy()
            up[j] += h
            dn[j] -= h
            fd = (phi(model, record, up) - phi(model, record, dn)) / (2 * h)
            denom = max(abs(fd), 1e-10)
            assert abs(grad[j] - fd) / denom < 1e-6


@pytest.mark.parametrize("kind", [m for m in MODEL_NAMES if m not in ("null", "nl-signed-spread")])
def test_linearity(kind, rng):
    model = make_model(kind)
    assert is_linear(model)
    record = _random_record(rng)
    t1, t2 = _random_theta(model, rng), _random_theta(model, rng)
    a, b = 0.3, -1.2
    lhs = phi(model, record, np.clip(a * t1 + b * t2, model.theta_bounds[:, 0], model.theta_bounds[:, 1]))
    combo = np.clip(a * t1 + b * t2, model.theta_bounds[:, 0], model.theta_bounds[:, 1])
    rhs = 0.0
    # evaluate against the clipped combination so theta stays admissible
    for coef, t in ((1.0, combo),):
        rhs += coef * phi(model, record, t)
    assert lhs == pytest.approx(rhs)
    # strict linearity on an interior combination
    t3 = 0.5 * t1 + 0.5 * t2
    assert phi(model, record, t3) == pytest.approx(
        0.5 * phi(model, record, t1) + 0.5 * phi(model, record, t2), rel=1e-12, abs=1e-18
    )


def test_missing_covariate():
    with pytest.raises(MissingCovariate):
        phi(make_model("signed-spread"), {"I": 1.0}, [0.5])


def test_theta_out_of_bounds():
    with pytest.raises(OutOfBounds):
        phi(make_model("roll"), {"I": 1.0}, [1.0])


def test_dim_mismatch():
    with pytest.raises(OutOfBounds):
        phi(make_model("glosten-harris"), {"I": 1.0, "V": 10.0}, [1e-4])


def test_duration_clamp():
    model = make_model("signed-timestamp")
    v = phi(model, {"I": 1.0, "D": 0.0}, [1e-9])
    assert np.isfinite(v) and v == pytest.approx(1.0)
