"""Command-line surface.

Subcommands: ``fit`` (exp | err | null), ``test`` (residual-noise test),
``select`` (staged volatility estimate), ``gof`` (explained-variance
ratio), ``simulate`` (scenario dump to tick CSV) and ``study``
(rejection | estimator tables).  Every subcommand accepts a flat
key=value config file plus flag overrides, writes machine-readable CSV
with ``--out`` and prints a human summary.

Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from typing import Optional

import numpy as np

from . import __version__
from .avar import TruncationConfig
from .data import validate
from .errors import (
    DegenerateVariance,
    EmptyFile,
    IndefiniteKernel,
    InsufficientData,
    LobnoiseError,
    MissingCovariate,
    NoConvergence,
    OutOfBounds,
    ParseError,
    StudyDegenerate,
    Undefined,
    WindowTooLarge,
)
from .estimators import (
    DEFAULT_BOUNDS,
    LARGE_NOISE,
    SMALL_TEST,
    fit_err,
    fit_exp,
    fit_null,
    pi_v_hat,
)
from .hausman import run_test, select_volatility
from .io import LoadOptions, config_section, dump_ticks, load_ticks, read_config
from .models import MODEL_NAMES, make_model
from .montecarlo import (
    ESTIMATOR_NAMES,
    StudyConfig,
    estimator_study,
    rejection_study,
    write_csv,
)
from .simulator import (
    InfoConfig,
    NoiseConfig,
    PriceConfig,
    ScenarioConfig,
    SeasonalityConfig,
    StochVolConfig,
    TimesConfig,
    simulate_scenario,
)

USAGE_EXIT = 1
DATA_EXIT = 2
NUMERIC_EXIT = 3

DATA_ERRORS = (ParseError, EmptyFile, InsufficientData, MissingCovariate)
NUMERIC_ERRORS = (
    IndefiniteKernel,
    NoConvergence,
    DegenerateVariance,
    Undefined,
    WindowTooLarge,
    OutOfBounds,
    StudyDegenerate,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _dataclass_from(cls, overrides: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {k: v for k, v in overrides.items() if k in names}
    return cls(**kwargs)


def _scenario_from_config(parser_cfg, seed: Optional[int]) -> ScenarioConfig:
    sections = {
        "price": PriceConfig,
        "seasonality": SeasonalityConfig,
        "sv": StochVolConfig,
        "times": TimesConfig,
        "info": InfoConfig,
        "noise": NoiseConfig,
    }
    kwargs = {}
    for name, cls in sections.items():
        values = config_section(parser_cfg, name) if parser_cfg else {}
        if name == "info" and "theta0" in values:
            values["theta0"] = tuple(
                float(x) for x in str(values["theta0"]).split(",")
            )
        kwargs[name] = _dataclass_from(cls, values)
    top = config_section(parser_cfg, "scenario") if parser_cfg else {}
    cfg = ScenarioConfig(
        **kwargs,
        horizon=float(top.get("horizon", 1.0 / 252.0)),
        fine_factor=int(top.get("fine_factor", 10)),
        seed=int(top.get("seed", 0)),
    )
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    return cfg


def _trunc_from_config(parser_cfg) -> TruncationConfig:
    values = config_section(parser_cfg, "truncation") if parser_cfg else {}
    return _dataclass_from(TruncationConfig, values)


def _load_options(args, parser_cfg) -> LoadOptions:
    values = config_section(parser_cfg, "io") if parser_cfg else {}
    if getattr(args, "raw_price", False):
        values["raw_price"] = True
    if getattr(args, "session_start", None) is not None:
        values["session_start"] = args.session_start
    if getattr(args, "session_end", None) is not None:
        values["session_end"] = args.session_end
    return _dataclass_from(LoadOptions, values)


def _write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def _add_io_flags(sub):
    sub.add_argument("data", help="tick CSV file (header: time,price[,I,V,D,S,QD,OFI])")
    sub.add_argument("--model", default="roll", choices=MODEL_NAMES)
    sub.add_argument("--config", default=None, help="flat key=value config file")
    sub.add_argument("--out", default=None, help="write machine-readable CSV here")
    sub.add_argument("--raw-price", action="store_true", dest="raw_price")
    sub.add_argument("--session-start", default=None)
    sub.add_argument("--session-end", default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="lobnoise", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p_fit = subs.add_parser("fit", help="maximum-likelihood volatility fit")
    _add_io_flags(p_fit)
    p_fit.add_argument("--variant", default="err", choices=("exp", "err", "null"))
    p_fit.add_argument(
        "--noise-space", default=SMALL_TEST, choices=(SMALL_TEST, LARGE_NOISE)
    )

    p_test = subs.add_parser("test", help="residual-noise test")
    _add_io_flags(p_test)
    p_test.add_argument("--stat", default="auto", help="1..5 or auto")
    p_test.add_argument("--level", type=float, default=0.05)
    p_test.add_argument("--raw-returns", action="store_true")

    p_sel = subs.add_parser("select", help="staged volatility estimate")
    _add_io_flags(p_sel)
    p_sel.add_argument("--stat", default="auto")
    p_sel.add_argument("--level", type=float, default=0.05)

    p_gof = subs.add_parser("gof", help="explained-variance ratio")
    _add_io_flags(p_gof)
    p_gof.add_argument(
        "--noise-space", default=LARGE_NOISE, choices=(SMALL_TEST, LARGE_NOISE)
    )

    p_sim = subs.add_parser("simulate", help="dump one simulated session")
    p_sim.add_argument("--config", default=None)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--seed", type=int, default=None)

    p_study = subs.add_parser("study", help="Monte Carlo tables")
    p_study.add_argument("kind", choices=("rejection", "estimator"))
    p_study.add_argument("--config", default=None)
    p_study.add_argument("--out", default=None)
    p_study.add_argument("--replications", type=int, default=None)
    p_study.add_argument("--seed", type=int, default=None)
    p_study.add_argument("--workers", type=int, default=None)
    return parser


def _fit_row(result):
    row = {
        "variant": result.variant,
        "sigma2": result.sigma2,
        "a2": "" if result.a2 is None else result.a2,
        "loglik": result.loglik,
        "iterations": result.iterations,
        "converged": result.converged,
        "bounds_hit": ";".join(result.bounds_hit),
        "n_obs": result.n_obs,
    }
    if result.theta is not None:
        for j, t in enumerate(result.theta):
            row[f"theta{j}"] = t
    return row


def _cmd_fit(args) -> int:
    cfgfile = read_config(args.config) if args.config else None
    series = load_ticks(args.data, _load_options(args, cfgfile)).series
    model = make_model(args.model)
    if args.variant == "exp":
        result = fit_exp(series, model)
    elif args.variant == "err":
        result = fit_err(series, model, noise_space=args.noise_space)
    else:
        result = fit_null(series, noise_space=args.noise_space)
    row = _fit_row(result)
    if args.out:
        _write_rows(args.out, [row])
    theta_text = (
        ", ".join(f"{t:.6g}" for t in result.theta)
        if result.theta is not None
        else "-"
    )
    print(
        f"{result.variant} fit on {args.data}: sigma2={result.sigma2:.6g} "
        f"theta=[{theta_text}] a2={row['a2'] or '-'} loglik={result.loglik:.6g} "
        f"converged={result.converged}"
    )
    return 0


def _cmd_test(args) -> int:
    cfgfile = read_config(args.config) if args.config else None
    series = load_ticks(args.data, _load_options(args, cfgfile)).series
    model = make_model(args.model)
    stat = args.stat if args.stat == "auto" else int(args.stat)
    report = run_test(
        series,
        model,
        variant=stat,
        level=args.level,
        cfg=_trunc_from_config(cfgfile),
        use_raw_returns=args.raw_returns,
    )
    row = {
        "statistic": report.statistic,
        "avar_variant": report.avar_variant,
        "p_value": report.p_value,
        "level": report.level,
        "reject": report.reject,
        "sigma2_exp": report.components.sigma2_exp,
        "sigma2_err": report.components.sigma2_err,
        "v_hat": report.components.v_hat,
        "n_obs": report.components.n_obs,
    }
    if args.out:
        _write_rows(args.out, [row])
    verdict = "reject" if report.reject else "fail to reject"
    print(
        f"S{report.avar_variant} = {report.statistic:.4f} "
        f"(p={report.p_value:.4g}) at level {report.level}: {verdict} "
        f"the no-residual-noise hypothesis"
    )
    return 0


def _cmd_select(args) -> int:
    cfgfile = read_config(args.config) if args.config else None
    series = load_ticks(args.data, _load_options(args, cfgfile)).series
    model = make_model(args.model)
    stat = args.stat if args.stat == "auto" else int(args.stat)
    result = select_volatility(
        series,
        model,
        level=args.level,
        cfg=_trunc_from_config(cfgfile),
        variant=stat,
    )
    stage_rows = []
    for i, rep in enumerate(result.stage_reports, start=1):
        stage_rows.append(
            {
                "stage": i,
                "statistic": rep.statistic,
                "p_value": rep.p_value,
                "reject": rep.reject,
            }
        )
    row = {
        "chosen_estimate": result.chosen_estimate,
        "provenance": result.provenance,
        "stage1_stat": stage_rows[0]["statistic"],
        "stage1_reject": stage_rows[0]["reject"],
        "stage2_stat": stage_rows[1]["statistic"] if len(stage_rows) > 1 else "",
        "stage2_reject": stage_rows[1]["reject"] if len(stage_rows) > 1 else "",
    }
    if args.out:
        _write_rows(args.out, [row])
    print(
        f"volatility estimate {result.chosen_estimate:.6g} from {result.provenance}"
    )
    return 0


def _cmd_gof(args) -> int:
    cfgfile = read_config(args.config) if args.config else None
    series = load_ticks(args.data, _load_options(args, cfgfile)).series
    model = make_model(args.model)
    fit = fit_err(series, model, noise_space=args.noise_space)
    ratio = pi_v_hat(series, model, fit)
    clamped = fit.a2 is not None and fit.a2 < 0
    row = {
        "pi_v_hat": ratio,
        "a2": fit.a2,
        "a2_clamped": clamped,
        "sigma2": fit.sigma2,
    }
    if args.out:
        _write_rows(args.out, [row])
    note = " (negative noise variance clamped to 0)" if clamped else ""
    print(f"explained variance share pi_V = {ratio:.4%}{note}")
    return 0


def _cmd_simulate(args) -> int:
    cfgfile = read_config(args.config) if args.config else None
    scenario = _scenario_from_config(cfgfile, args.seed)
    series, truth = simulate_scenario(scenario)
    problems = validate(series)
    if problems:
        raise ParseError(f"simulated series failed validation: {problems[:3]}")
    dump_ticks(series, args.out)
    print(
        f"wrote {len(series.times)} ticks to {args.out} "
        f"(qv={truth.quadratic_variation:.6g}, "
        f"jump_share={truth.jump_squares / truth.quadratic_variation:.2%})"
    )
    return 0


def _cmd_study(args) -> int:
    cfgfile = read_config(args.config) if args.config else None
    values = config_section(cfgfile, "study") if cfgfile else {}

    def _tuple(key, default):
        raw = values.get(key)
        if raw is None:
            return default
        return tuple(str(raw).replace(" ", "").split(","))

    noise_raw = values.get("noise_grid", "H0:0")
    noise_grid = []
    for chunk in str(noise_raw).replace(" ", "").split(","):
        regime, _, level = chunk.partition(":")
        noise_grid.append((regime, float(level or 0.0)))
    cfg = StudyConfig(
        vol_regimes=_tuple("vol_regimes", ("constant",)),
        noise_grid=tuple(noise_grid),
        models=_tuple("models", ("roll",)),
        frequencies=_tuple("frequencies", ("tick",)),
        replications=args.replications
        or int(values.get("replications", 500)),
        level=float(values.get("level", 0.05)),
        seed=args.seed if args.seed is not None else int(values.get("seed", 20170408)),
        workers=args.workers,
    )
    rows = rejection_study(cfg) if args.kind == "rejection" else estimator_study(cfg)
    if args.out:
        write_csv(rows, args.out)
    for row in rows:
        print(row)
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "test": _cmd_test,
    "select": _cmd_select,
    "gof": _cmd_gof,
    "simulate": _cmd_simulate,
    "study": _cmd_study,
}


def cli_dispatch(argv) -> int:
    """Parse arguments and run the selected subcommand."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else USAGE_EXIT
        return 0 if code == 0 else USAGE_EXIT
    try:
        return _COMMANDS[args.command](args)
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERIC_EXIT
    except LobnoiseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NUMERIC_EXIT


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))
