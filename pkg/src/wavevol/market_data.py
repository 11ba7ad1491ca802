"""Tick ingestion, cleaning and sessionization.

Ticks are ``(timestamp_ms, price)`` pairs in UTC epoch milliseconds.  A
trading day runs from ``open`` on the previous calendar day to ``close`` on
the labelled day (17:00 to 16:00 Chicago time by default), so the one-hour
maintenance break never falls inside a session.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

import numpy as np

from .errors import ConfigError, DegenerateSessionError, FormatError, InsufficientDataError

logger = logging.getLogger(__name__)

TICK_HEADER = ["timestamp_ms", "price"]
SESSION_HEADER = ["date", "k", "timestamp_ms", "log_price", "return"]
MAX_MALFORMED_SHARE = 0.01
DAY_MS = 86_400_000


@dataclass
class TickSeries:
    instrument: str
    timestamps: np.ndarray
    prices: np.ndarray
    malformed: int = 0

    def __len__(self):
        return len(self.timestamps)


def parse_ticks(source, instrument: str = "") -> TickSeries:
    """Read a ``timestamp_ms,price`` CSV.

    ``source`` is a path, bytes, or a binary/text file object.  Rows that do
    not parse, or carry a non-positive price, are skipped and counted; more
    than 1% of them is a :class:`FormatError`.  Output is sorted by
    timestamp (stable for equal stamps).
    """
    try:
        if isinstance(source, (str, os.PathLike)):
            with open(source, "rb") as fh:
                raw = fh.read()
        elif isinstance(source, (bytes, bytearray)):
            raw = bytes(source)
        else:
            raw = source.read()
    except OSError as exc:
        raise OSError(f"cannot read tick stream: {exc}") from exc
    try:
        text = raw.decode("utf-8-sig") if isinstance(raw, (bytes, bytearray)) else raw
    except UnicodeDecodeError as exc:
        raise FormatError(f"tick stream is not UTF-8: {exc}") from exc

    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != TICK_HEADER:
        raise FormatError(f"expected header {','.join(TICK_HEADER)}, got {header!r}")

    stamps, prices = [], []
    bad, first_bad, rows = 0, None, 0
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        rows += 1
        try:
            if len(row) != 2:
                raise ValueError
            ts = int(row[0])
            px = float(row[1])
            if not (px > 0 and math.isfinite(px)):
                raise ValueError
        except ValueError:
            bad += 1
            first_bad = first_bad or lineno
            continue
        stamps.append(ts)
        prices.append(px)
    if rows and bad / rows > MAX_MALFORMED_SHARE:
        raise FormatError(f"{bad} of {rows} rows malformed (first at line {first_bad})")
    if bad:
        logger.warning("skipped %d malformed tick rows (first at line %d)", bad, first_bad)
    ts = np.asarray(stamps, dtype=np.int64)
    px = np.asarray(prices, dtype=float)
    order = np.argsort(ts, kind="stable")
    return TickSeries(instrument, ts[order], px[order], malformed=bad)


def dedup_same_timestamp(t: TickSeries) -> TickSeries:
    """Replace each run of equal timestamps by one tick at the mean price."""
    if len(t) == 0:
        return t
    stamps, inverse, counts = np.unique(t.timestamps, return_inverse=True, return_counts=True)
    if len(stamps) == len(t):
        return t
    means = np.bincount(inverse, weights=t.prices) / counts
    return TickSeries(t.instrument, stamps, means, t.malformed)


@dataclass
class SessionCalendar:
    """Trading-day definition.

    When ``open`` is later than ``close`` the session starts on the previous
    calendar day.  Sessions labelled on a weekend (if ``exclude_weekends``) or
    on an ``excluded_dates`` entry are dropped, as are sessions with fewer
    than ``min_ticks`` ticks.
    """

    timezone: str = "America/Chicago"
    open: dt.time = dt.time(17, 0)
    close: dt.time = dt.time(16, 0)
    excluded_dates: frozenset = frozenset()
    exclude_weekends: bool = True
    min_ticks: int = 100

    def __post_init__(self):
        try:
            self.tz = ZoneInfo(self.timezone)
        except (ZoneInfoNotFoundError, ValueError) as exc:
            raise ConfigError(f"unknown timezone {self.timezone!r}") from exc
        self.excluded_dates = frozenset(self.excluded_dates)
        if self.min_ticks < 0:
            raise ConfigError("min_ticks must be >= 0")

    @property
    def overnight(self) -> bool:
        return self.open > self.close

    @classmethod
    def from_dict(cls, d: dict) -> "SessionCalendar":
        try:
            dates = [dt.date.fromisoformat(s) for s in d.get("excluded_dates", [])]
            if len(set(dates)) != len(dates):
                raise ConfigError("excluded_dates contains duplicates")
            return cls(
                timezone=d.get("timezone", "America/Chicago"),
                open=dt.time.fromisoformat(d.get("open", "17:00")),
                close=dt.time.fromisoformat(d.get("close", "16:00")),
                excluded_dates=frozenset(dates),
                exclude_weekends=bool(d.get("exclude_weekends", True)),
                min_ticks=int(d.get("min_ticks", 100)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad calendar config: {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "SessionCalendar":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "timezone": self.timezone,
            "open": self.open.strftime("%H:%M"),
            "close": self.close.strftime("%H:%M"),
            "excluded_dates": sorted(d.isoformat() for d in self.excluded_dates),
            "exclude_weekends": self.exclude_weekends,
            "min_ticks": self.min_ticks,
        }

    def bounds(self, day: dt.date) -> tuple[int, int]:
        """UTC epoch-ms ``[open, close)`` of the session labelled ``day``."""
        start_day = day - dt.timedelta(days=1) if self.overnight else day
        start = dt.datetime.combine(start_day, self.open, tzinfo=self.tz)
        end = dt.datetime.combine(day, self.close, tzinfo=self.tz)
        return int(start.timestamp() * 1000), int(end.timestamp() * 1000)

    def is_excluded(self, day: dt.date) -> bool:
        return (self.exclude_weekends and day.weekday() >= 5) or day in self.excluded_dates


@dataclass
class RawSession:
    date: dt.date
    open_ms: int
    close_ms: int
    timestamps: np.ndarray
    prices: np.ndarray


def build_sessions(t: TickSeries, cal: SessionCalendar) -> list[RawSession]:
    """Cut a deduplicated tick series into trading sessions."""
    if len(t) == 0:
        return []
    ts = t.timestamps
    first = dt.datetime.fromtimestamp(ts[0] / 1000, tz=cal.tz).date()
    last = dt.datetime.fromtimestamp(ts[-1] / 1000, tz=cal.tz).date()
    out = []
    day = first
    while day <= last + dt.timedelta(days=1):
        lo, hi = cal.bounds(day)
        i0, i1 = np.searchsorted(ts, [lo, hi], side="left")
        day_ticks = i1 - i0
        if day_ticks and not cal.is_excluded(day):
            if day_ticks < cal.min_ticks:
                logger.warning("dropping session %s: %d ticks < %d", day, day_ticks, cal.min_ticks)
            else:
                out.append(RawSession(day, lo, hi, ts[i0:i1], t.prices[i0:i1]))
        day += dt.timedelta(days=1)
    return out


@dataclass
class TradingSession:
    """One day on a regular grid: ``K+1`` log prices and ``N=K`` returns."""

    date: str
    timestamps: np.ndarray
    log_prices: np.ndarray

    @property
    def returns(self) -> np.ndarray:
        return np.diff(self.log_prices)

    @property
    def n(self) -> int:
        return len(self.log_prices) - 1

    @property
    def open_close_return(self) -> float:
        return float(self.log_prices[-1] - self.log_prices[0])


def sample_grid(timestamps, prices, delta_ms: int, start_ms: int | None = None,
                end_ms: int | None = None, date: str = "") -> TradingSession:
    """Previous-tick sampling onto ``start, start+delta, ...`` up to ``end``.

    A trailing partial interval is dropped.  Grid points before the first
    tick take the first tick's price.
    """
    ts = np.asarray(timestamps, dtype=np.int64)
    px = np.asarray(prices, dtype=float)
    if len(ts) < 2:
        raise DegenerateSessionError(f"{date}: session has {len(ts)} ticks, need at least 2")
    if delta_ms <= 0:
        raise ConfigError("grid interval must be positive")
    start = int(ts[0]) if start_ms is None else int(start_ms)
    end = int(ts[-1]) if end_ms is None else int(end_ms)
    K = (end - start) // delta_ms
    grid = start + delta_ms * np.arange(K + 1, dtype=np.int64)
    idx = np.searchsorted(ts, grid, side="right") - 1
    if np.count_nonzero(idx >= 0) < 2:
        raise DegenerateSessionError(f"{date}: fewer than 2 grid points have a preceding tick")
    idx[idx < 0] = 0
    return TradingSession(date=date, timestamps=grid, log_prices=np.log(px[idx]))


def sessionize(t: TickSeries, cal: SessionCalendar, delta_ms: int = 300_000) -> list[TradingSession]:
    """Dedup, cut into sessions and sample each on the grid aligned to the session open."""
    out = []
    for s in build_sessions(dedup_same_timestamp(t), cal):
        out.append(sample_grid(s.timestamps, s.prices, delta_ms, s.open_ms, s.close_ms, s.date.isoformat()))
    return out


@dataclass
class ReturnStats:
    mean: float
    std_dev: float
    skewness: float
    kurtosis: float
    n: int = field(default=0)


def summary_stats(r) -> ReturnStats:
    """Mean, sample std, skewness and raw (non-excess) kurtosis."""
    r = np.asarray(r, dtype=float)
    if r.size < 4:
        raise InsufficientDataError(f"summary statistics need at least 4 returns, got {r.size}")
    m = r.mean()
    dev = r - m
    m2 = np.mean(dev**2)
    if m2 == 0:
        return ReturnStats(float(m), 0.0, 0.0, float("nan"), r.size)
    skew = np.mean(dev**3) / m2**1.5
    kurt = np.mean(dev**4) / m2**2
    return ReturnStats(float(m), float(r.std(ddof=1)), float(skew), float(kurt), r.size)


def write_sessions(sessions, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SESSION_HEADER)
        for s in sessions:
            lp = s.log_prices
            for k in range(len(lp)):
                ret = "" if k == 0 else repr(float(lp[k] - lp[k - 1]))
                w.writerow([s.date, k, int(s.timestamps[k]), repr(float(lp[k])), ret])


def read_sessions(path) -> list[TradingSession]:
    rows: dict[str, tuple[list, list]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SESSION_HEADER:
            raise FormatError(f"{path}: expected header {','.join(SESSION_HEADER)}")
        for line in reader:
            try:
                stamps, logs = rows.setdefault(line["date"], ([], []))
                stamps.append(int(line["timestamp_ms"]))
                logs.append(float(line["log_price"]))
            except (TypeError, ValueError) as exc:
                raise FormatError(f"{path}: bad session row {line!r}") from exc
    return [TradingSession(d, np.asarray(s, dtype=np.int64), np.asarray(lp)) for d, (s, lp) in rows.items()]


def write_returns(dates, returns, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "return"])
        for d, r in zip(dates, returns):
            w.writerow([d, repr(float(r))])


def read_returns(path) -> tuple[list[str], np.ndarray]:
    dates, values = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["date", "return"]:
            raise FormatError(f"{path}: expected header date,return")
        for line in reader:
            try:
                values.append(float(line["return"]))
            except (TypeError, ValueError) as exc:
                raise FormatError(f"{path}: bad return row {line!r}") from exc
            dates.append(line["date"])
    return dates, np.asarray(values)
