"""Integrated-volatility estimation under limit-order-book noise models.

The package fits quasi-likelihood volatility estimators to noisy
high-frequency prices whose microstructure noise is partly explained by
observable order-book variables, tests whether any residual noise
remains, and ships a market simulator plus a Monte Carlo harness for
calibrating the tests.
"""

__version__ = "0.1.0"

from .avar import TruncationConfig, spot_sigma2alpha, v1, v2, v3, v4, v5
from .data import ReturnSeries, TickSeries, returns, validate
from .estimators import (
    DEFAULT_BOUNDS,
    LARGE_NOISE,
    SMALL_TEST,
    EfficientPricePath,
    FitBounds,
    FitResult,
    e_qmle,
    efficient_price,
    fit_err,
    fit_exp,
    fit_null,
    pi_v_hat,
    realized_variance,
)
from .hausman import (
    SequenceResult,
    TestReport,
    hausman,
    run_test,
    select_volatility,
)
from .likelihood import (
    MA1Kernel,
    bypart_transform,
    logdet,
    loglik_err,
    loglik_exp,
    omega_inv_coeff,
    quadform,
)
from .models import NoiseModel, make_model, mu, phi, phi_grad
from .montecarlo import StudyConfig, estimator_study, rejection_study, write_csv
from .simulator import (
    GroundTruth,
    InfoConfig,
    NoiseConfig,
    PriceConfig,
    ScenarioConfig,
    SeasonalityConfig,
    StochVolConfig,
    TimesConfig,
    simulate_info,
    simulate_noise,
    simulate_scenario,
    simulate_times,
)

__all__ = [name for name in dir() if not name.startswith("_")]
