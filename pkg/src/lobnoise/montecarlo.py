"""Replication driver: rejection-rate tables and estimator comparisons.

Cells are (volatility regime, noise regime, offset model, sampling
frequency, statistic); every cell runs M independent days, each seeded
deterministically from (base seed, cell index, replication index), so a
study is reproducible regardless of worker scheduling.  Per-day fit
failures are excluded from the cell fraction, counted, and surfaced;
more than 1% failures degenerates the study.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .avar import TruncationConfig
from .errors import LobnoiseError, StudyDegenerate
from .estimators import (
    DEFAULT_BOUNDS,
    SMALL_TEST,
    FitBounds,
    e_qmle,
    fit_null,
)
from .hausman import prepare_fits, run_test, select_volatility
from .models import make_model
from .simulator import (
    H0,
    H1,
    H2,
    IRREGULAR,
    REGULAR,
    SECONDS_PER_DAY,
    InfoConfig,
    NoiseConfig,
    ScenarioConfig,
    TimesConfig,
    constant_vol,
    simulate_scenario,
)

WORKERS_ENV = "LOBNOISE_WORKERS"

VOL_REGIMES = ("constant", "sv", "sv-jump")
FREQUENCIES = {
    "tick": TimesConfig(mode=IRREGULAR, n=SECONDS_PER_DAY, rate=2.0),
    "1s": TimesConfig(mode=REGULAR, n=SECONDS_PER_DAY),
    "15s": TimesConfig(mode=REGULAR, n=SECONDS_PER_DAY // 15),
    "30s": TimesConfig(mode=REGULAR, n=SECONDS_PER_DAY // 30),
}
#: statistics matched to each sampling frequency
FREQUENCY_STATS = {"tick": (1, 2), "1s": (1,), "15s": (3, 4, 5), "30s": (3, 4, 5)}

MODEL_THETA0 = {
    "roll": (0.0001,),
    "signed-spread": (0.80,),
}

MIX = "mix"
ESTIMATOR_NAMES = ("S", "QMLEexp", "QMLEerr", "EQMLE", "QMLE", "RV")


@dataclass(frozen=True)
class StudyConfig:
    """Grid specification for a Monte Carlo study."""

    vol_regimes: tuple = ("constant",)
    #: pairs (regime, a0_sq); regime H0 ignores a0_sq, "mix" alternates
    noise_grid: tuple = ((H0, 0.0),)
    models: tuple = ("roll",)
    frequencies: tuple = ("tick",)
    replications: int = 500
    level: float = 0.05
    seed: int = 20170408
    estimators: tuple = ESTIMATOR_NAMES
    workers: Optional[int] = None
    max_failure_share: float = 0.01

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        for regime in self.vol_regimes:
            if regime not in VOL_REGIMES:
                raise ValueError(f"unknown volatility regime {regime!r}")
        for freq in self.frequencies:
            if freq not in FREQUENCIES:
                raise ValueError(f"unknown frequency {freq!r}")


def resolve_workers(requested: Optional[int]) -> int:
    if requested is not None:
        return max(1, requested)
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def scenario_for(
    vol_regime: str,
    frequency: str,
    model: str,
    noise_regime: str,
    a0_sq: float,
    seed: int,
) -> ScenarioConfig:
    """Assemble the scenario for one Monte Carlo cell."""
    info = InfoConfig(model=model, theta0=MODEL_THETA0.get(model, (0.0001,)))
    cfg = ScenarioConfig(
        times=FREQUENCIES[frequency],
        info=info,
        noise=NoiseConfig(regime=noise_regime, a0_sq=a0_sq),
        seed=seed,
    )
    if vol_regime == "constant":
        return constant_vol(cfg)
    if vol_regime == "sv":
        return replace(cfg, price=replace(cfg.price, enable_jumps=False))
    return cfg


def _rep_seed(base: int, cell: int, rep: int) -> int:
    return int(np.random.SeedSequence([base, cell, rep]).generate_state(1)[0])


def _rejection_rep(args):
    (scenario, model_name, stats, level) = args
    series, _ = simulate_scenario(scenario)
    model = make_model(model_name)
    cfg = TruncationConfig()
    try:
        fits = prepare_fits(series, model, noise_space=SMALL_TEST)
        out = {}
        for stat in stats:
            report = run_test(series, model, stat, level, cfg, fits=fits)
            out[stat] = (report.reject, report.p_value)
        return out
    except LobnoiseError:
        return None


def _run_pool(worker, tasks, workers: int, chunksize: int = 8):
    if workers <= 1 or len(tasks) < 2 * chunksize:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, tasks, chunksize=chunksize))


def rejection_study(cfg: StudyConfig, collect_pvalues: bool = False):
    """Rejection fraction per cell; returns a list of row dicts.

    With ``collect_pvalues`` each row also carries the per-day p-values
    of its statistic (useful for distributional diagnostics).
    """
    workers = resolve_workers(cfg.workers)
    rows = []
    cell_index = 0
    for vol in cfg.vol_regimes:
        for noise_regime, a0_sq in cfg.noise_grid:
            regime = H0 if noise_regime == H0 else noise_regime
            a0 = 0.0 if regime == H0 else a0_sq
            for model_name in cfg.models:
                for freq in cfg.frequencies:
                    stats = FREQUENCY_STATS[freq]
                    tasks = [
                        (
                            scenario_for(
                                vol,
                                freq,
                                model_name,
                                regime,
                                a0,
                                _rep_seed(cfg.seed, cell_index, rep),
                            ),
                            model_name,
                            stats,
                            cfg.level,
                        )
                        for rep in range(cfg.replications)
                    ]
                    results = _run_pool(_rejection_rep, tasks, workers)
                    n_fail = sum(1 for r in results if r is None)
                    if n_fail > cfg.max_failure_share * cfg.replications:
                        raise StudyDegenerate(
                            f"{n_fail}/{cfg.replications} failures in cell "
                            f"({vol}, {regime}, {a0}, {model_name}, {freq})"
                        )
                    good = [r for r in results if r is not None]
                    for stat in stats:
                        rejects = [r[stat][0] for r in good]
                        m = len(rejects)
                        frac = sum(rejects) / m if m else math.nan
                        stderr = (
                            math.sqrt(frac * (1.0 - frac) / m) if m else math.nan
                        )
                        row = {
                            "vol_regime": vol,
                            "noise_regime": regime,
                            "a0_sq": a0,
                            "model": model_name,
                            "frequency": freq,
                            "statistic": f"S{stat}",
                            "value": frac,
                            "mc_stderr": stderr,
                            "n_fail": n_fail,
                        }
                        if collect_pvalues:
                            row["p_values"] = [r[stat][1] for r in good]
                        rows.append(row)
                    cell_index += 1
    return rows


def _estimator_rep(args):
    (scenario, model_name, level, variant, estimators) = args
    series, truth = simulate_scenario(scenario)
    model = make_model(model_name)
    cfg = TruncationConfig()
    try:
        fits = prepare_fits(series, model, noise_space=SMALL_TEST)
        values = {}
        if "RV" in estimators:
            values["RV"] = fits.rv_raw
        if "QMLEexp" in estimators:
            values["QMLEexp"] = fits.fit_exp.sigma2
        if "QMLEerr" in estimators:
            values["QMLEerr"] = fits.fit_err.sigma2
        if "QMLE" in estimators:
            values["QMLE"] = fit_null(series, noise_space=SMALL_TEST).sigma2
        if "EQMLE" in estimators:
            values["EQMLE"] = e_qmle(series, model, noise_space=SMALL_TEST).sigma2
        if "S" in estimators:
            seq = select_volatility(
                series, model, level, cfg, variant=variant, fits=fits
            )
            values["S"] = seq.chosen_estimate
            values["_provenance"] = seq.provenance
        return values, truth.sigma2_bar
    except LobnoiseError:
        return None


def estimator_study(cfg: StudyConfig, variant: int = 1):
    """Bias / stdev / RMSE of the concurrent volatility estimators.

    The scenario is the time-varying-volatility, no-price-jump model on
    a regular one-second grid.  The noise grid may include ``mix``: half
    the days noise-free, half with the paired variance, interleaved
    deterministically (even replication indices are noise-free).
    """
    workers = resolve_workers(cfg.workers)
    rows = []
    cell_index = 10_000
    for model_name in cfg.models:
        for noise_regime, a0_sq in cfg.noise_grid:
            tasks = []
            for rep in range(cfg.replications):
                if noise_regime == MIX:
                    regime = H0 if rep % 2 == 0 else H1
                    a0 = 0.0 if regime == H0 else a0_sq
                elif noise_regime == H0:
                    regime, a0 = H0, 0.0
                else:
                    regime, a0 = noise_regime, a0_sq
                tasks.append(
                    (
                        scenario_for(
                            "sv",
                            "1s",
                            model_name,
                            regime,
                            a0,
                            _rep_seed(cfg.seed, cell_index, rep),
                        ),
                        model_name,
                        cfg.level,
                        variant,
                        cfg.estimators,
                    )
                )
            results = _run_pool(_estimator_rep, tasks, workers)
            n_fail = sum(1 for r in results if r is None)
            if n_fail > cfg.max_failure_share * cfg.replications:
                raise StudyDegenerate(
                    f"{n_fail}/{cfg.replications} failures in estimator cell "
                    f"({noise_regime}, {a0_sq}, {model_name})"
                )
            good = [r for r in results if r is not None]
            for name in cfg.estimators:
                errors = np.array([vals[name] - truth for vals, truth in good])
                rows.append(
                    {
                        "model": model_name,
                        "noise": noise_regime,
                        "a0_sq": a0_sq,
                        "estimator": name,
                        "bias": float(errors.mean()),
                        "stdev": float(errors.std(ddof=1)) if len(errors) > 1 else 0.0,
                        "rmse": float(np.sqrt(np.mean(errors**2))),
                        "n_fail": n_fail,
                    }
                )
            provenances = [vals.get("_provenance") for vals, _ in good]
            rows.append(
                {
                    "model": model_name,
                    "noise": noise_regime,
                    "a0_sq": a0_sq,
                    "estimator": "_provenance_counts",
                    "bias": provenances.count("QMLE_exp"),
                    "stdev": provenances.count("QMLE_err"),
                    "rmse": provenances.count("RV_raw"),
                    "n_fail": n_fail,
                }
            )
            cell_index += 1
    return rows


def write_csv(rows: Sequence[dict], path: str) -> None:
    """Emit study rows as CSV with a fixed header per study kind."""
    if not rows:
        raise ValueError("no rows to write")
    fields = [k for k in rows[0].keys() if k != "p_values"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
