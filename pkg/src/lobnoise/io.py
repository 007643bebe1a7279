"""CSV tick-data ingestion and flat key=value configuration files.

The tick format is a header row ``time,price`` optionally followed by
any of the covariate columns ``I,V,D,S,QD,OFI`` in any order.  Times are
seconds from session open or ISO-8601 stamps (auto-detected); prices are
log-prices unless ``raw_price`` asks for a log transform.  Rows sharing
a timestamp after annualization are dropped beyond the first and
counted, since the estimation grid requires strictly increasing times.
"""

from __future__ import annotations

import configparser
import csv
from dataclasses import dataclass
from datetime import datetime
from typing import Optional

import numpy as np

from .data import COVARIATE_NAMES, TickSeries, validate
from .errors import EmptyFile, ParseError
from .simulator import DEFAULT_HORIZON, SECONDS_PER_DAY


@dataclass(frozen=True)
class LoadOptions:
    """Ingestion knobs for :func:`load_ticks`."""

    raw_price: bool = False
    horizon: float = DEFAULT_HORIZON
    seconds_per_session: float = float(SECONDS_PER_DAY)
    #: session trimming in seconds from open (or "HH:MM[:SS]" clock times
    #: when the file carries ISO timestamps); None disables trimming
    session_start: Optional[float] = None
    session_end: Optional[float] = None


@dataclass(frozen=True)
class LoadReport:
    rows_parsed: int
    duplicates_dropped: int
    rows_trimmed: int


@dataclass(frozen=True)
class LoadResult:
    series: TickSeries
    report: LoadReport


def _parse_clock(value) -> float:
    """Clock time 'HH:MM[:SS]' or plain seconds to seconds-of-day."""
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        while len(parts) < 3:
            parts.append(0.0)
        return parts[0] * 3600 + parts[1] * 60 + parts[2]
    return float(text)


def _time_to_seconds(raw: str, line: int, state: dict) -> float:
    raw = raw.strip()
    try:
        return float(raw)
    except ValueError:
        pass
    try:
        stamp = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise ParseError(f"line {line}: unparseable time {raw!r}", line) from exc
    seconds = (
        stamp.hour * 3600 + stamp.minute * 60 + stamp.second + stamp.microsecond / 1e6
    )
    if state.get("date") is None:
        state["date"] = stamp.date()
    elif stamp.date() != state["date"]:
        seconds += 86400.0 * (stamp.date() - state["date"]).days
    return seconds


def load_ticks(path: str, options: LoadOptions = LoadOptions()) -> LoadResult:
    """Read a tick CSV into a validated series.

    Raises ``EmptyFile`` when no data rows parse, ``ParseError`` with the
    offending 1-based line number otherwise.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path} has no header row") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0] != "time" or header[1] != "price":
            raise ParseError(f"header must start with time,price, got {header}", 1)
        extra = header[2:]
        unknown = [c for c in extra if c not in COVARIATE_NAMES]
        if unknown:
            raise ParseError(f"unknown covariate columns {unknown}", 1)

        times, prices = [], []
        cov_lists = {name: [] for name in extra}
        state: dict = {}
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"line {line_no}: expected {len(header)} fields, got {len(row)}",
                    line_no,
                )
            times.append(_time_to_seconds(row[0], line_no, state))
            try:
                prices.append(float(row[1]))
                for name, value in zip(extra, row[2:]):
                    cov_lists[name].append(float(value))
            except ValueError as exc:
                raise ParseError(f"line {line_no}: {exc}", line_no) from exc

    if not times:
        raise EmptyFile(f"{path} contains no data rows")

    times_arr = np.asarray(times, dtype=float)
    prices_arr = np.asarray(prices, dtype=float)
    covs = {k: np.asarray(v, dtype=float) for k, v in cov_lists.items()}

    start = _parse_clock(options.session_start)
    end = _parse_clock(options.session_end)
    keep = np.ones(len(times_arr), dtype=bool)
    if start is not None:
        keep &= times_arr >= start
    if end is not None:
        keep &= times_arr <= end
    rows_trimmed = int(np.sum(~keep))
    times_arr, prices_arr = times_arr[keep], prices_arr[keep]
    covs = {k: v[keep] for k, v in covs.items()}
    if len(times_arr) == 0:
        raise EmptyFile(f"{path}: session window removed every row")

    origin = times_arr[0] if start is None else start
    annual = (times_arr - origin) * options.horizon / options.seconds_per_session

    unique = np.ones(len(annual), dtype=bool)
    unique[1:] = np.diff(annual) > 0
    dropped = int(np.sum(~unique))
    annual, prices_arr = annual[unique], prices_arr[unique]
    covs = {k: v[unique] for k, v in covs.items()}

    if options.raw_price:
        if np.any(prices_arr <= 0):
            bad = int(np.nonzero(prices_arr <= 0)[0][0])
            raise ParseError(f"raw price must be positive (row index {bad})", None)
        prices_arr = np.log(prices_arr)

    horizon = max(options.horizon, float(annual[-1]) * (1 + 1e-12))
    series = TickSeries(
        times=annual, prices=prices_arr, covariates=covs, horizon=horizon
    )
    violations = validate(series)
    if violations:
        raise ParseError(f"invalid series after load: {violations[:5]}", None)
    return LoadResult(
        series=series,
        report=LoadReport(
            rows_parsed=len(times),
            duplicates_dropped=dropped,
            rows_trimmed=rows_trimmed,
        ),
    )


def dump_ticks(series: TickSeries, path: str, seconds_per_session=None) -> None:
    """Write a series in the tick CSV format (times in seconds)."""
    scale = (
        seconds_per_session
        if seconds_per_session is not None
        else SECONDS_PER_DAY / DEFAULT_HORIZON
    )
    names = [n for n in COVARIATE_NAMES if n in series.covariates]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "price"] + names)
        seconds = series.times * scale
        for i in range(len(series.times)):
            row = [f"{seconds[i]:.6f}", f"{series.prices[i]:.12g}"]
            row += [f"{series.covariates[n][i]:.12g}" for n in names]
            writer.writerow(row)


def read_config(path: str) -> configparser.ConfigParser:
    """Flat key=value sections; strings, numbers and booleans only."""
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    return parser


def config_section(parser, name: str) -> dict:
    """Section as a dict with best-effort typing of the values."""
    if not parser.has_section(name):
        return {}
    out = {}
    for key, raw in parser.items(name):
        text = raw.strip()
        low = text.lower()
        if low in ("true", "yes", "on"):
            out[key] = True
        elif low in ("false", "no", "off"):
            out[key] = False
        else:
            try:
                value = float(text)
                out[key] = int(value) if value == int(value) and "." not in text and "e" not in low else value
            except ValueError:
                out[key] = text
    return out
