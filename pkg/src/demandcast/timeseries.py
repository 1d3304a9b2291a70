"""Load and production time series: containers, calendar encoding, CSV I/O,
energy integration and billing-style maximum demand."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import NamedTuple

import numpy as np

VALID_CADENCES = (5, 15)
SAMPLES_PER_DAY_15MIN = 96

LOAD_CSV_HEADER = ("timestamp", "kw")
PRODUCTION_CSV_HEADER = ("date", "anodes_tmh", "acid_tmh", "oxygen_tmh")


class SeriesError(ValueError):
    """Invalid series content or an operation that the series cannot support."""


class CadenceError(SeriesError):
    """Timestamps in an input file are not on a uniform grid."""


class CsvParseError(SeriesError):
    """A row of an input file could not be parsed."""


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise SeriesError(f"{name} must be finite")
    if np.any(arr < 0):
        raise SeriesError(f"{name} must be non-negative")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class LoadSeries:
    """Uniformly sampled active power in kW.

    Sample ``i`` sits at ``start + i * cadence_minutes``.
    """

    start: datetime
    cadence_minutes: int
    values: np.ndarray

    def __post_init__(self):
        if self.cadence_minutes not in VALID_CADENCES:
            raise SeriesError(
                f"cadence_minutes must be one of {VALID_CADENCES}, got {self.cadence_minutes}"
            )
        object.__setattr__(self, "values", _frozen_array(self.values, "load values"))

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LoadSeries):
            return NotImplemented
        return (
            self.start == other.start
            and self.cadence_minutes == other.cadence_minutes
            and np.array_equal(self.values, other.values)
        )

    @property
    def step(self) -> timedelta:
        return timedelta(minutes=self.cadence_minutes)

    @property
    def end(self) -> datetime:
        """Timestamp one step past the last sample."""
        return self.start + len(self) * self.step

    def timestamp(self, i: int) -> datetime:
        return self.start + i * self.step

    def timestamps(self) -> list[datetime]:
        return [self.timestamp(i) for i in range(len(self))]

    def index_of(self, t: datetime) -> int:
        """Sample index of ``t``; raises if ``t`` is off-grid or out of range."""
        offset = (t - self.start) / self.step
        i = int(round(offset))
        if not math.isclose(offset, i, abs_tol=1e-9) or not 0 <= i < len(self):
            raise SeriesError(f"{t.isoformat()} is not a sample of this series")
        return i

    def with_values(self, values) -> LoadSeries:
        return LoadSeries(self.start, self.cadence_minutes, values)

    def slice(self, first: int, stop: int) -> LoadSeries:
        return LoadSeries(self.timestamp(first), self.cadence_minutes, self.values[first:stop])


@dataclass(frozen=True, eq=False)
class ProductionSeries:
    """Daily production rates in metric tons per hour, one value per day."""

    start_date: date
    anodes: np.ndarray
    acid: np.ndarray
    oxygen: np.ndarray

    def __post_init__(self):
        for name in ("anodes", "acid", "oxygen"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name), name))
        if not len(self.anodes) == len(self.acid) == len(self.oxygen):
            raise SeriesError("production channels must have equal length")

    def __len__(self) -> int:
        return len(self.anodes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProductionSeries):
            return NotImplemented
        return self.start_date == other.start_date and all(
            np.array_equal(getattr(self, n), getattr(other, n))
            for n in ("anodes", "acid", "oxygen")
        )

    @property
    def end_date(self) -> date:
        """First date past the covered span."""
        return self.start_date + timedelta(days=len(self))

    def covers(self, first: date, last: date | None = None) -> bool:
        last = first if last is None else last
        return self.start_date <= first and last < self.end_date

    def as_matrix(self) -> np.ndarray:
        """(M, 3) array of anodes, acid, oxygen."""
        return np.column_stack([self.anodes, self.acid, self.oxygen])

    def rates_on(self, day: date) -> np.ndarray:
        if not self.covers(day):
            raise SeriesError(f"production does not cover {day.isoformat()}")
        return self.as_matrix()[(day - self.start_date).days]


class CalendarFeatures(NamedTuple):
    month: int
    week_of_month: int
    day_of_week: int
    hour: int
    quarter: int


# Upper ends of the calendar ranges (month, week, day, hour, quarter); lower ends are 0.
CALENDAR_MAXIMA = CalendarFeatures(11, 4, 6, 23, 3)


def encode_calendar(t: datetime) -> CalendarFeatures:
    """Integer calendar pattern for a timestamp.

    ``month`` is 0-based, Monday is day 0, week of month is ``(day - 1) // 7``
    and quarter is the quarter-hour containing ``t.minute``.

    >>> encode_calendar(datetime(2007, 10, 15, 8, 30))
    CalendarFeatures(month=9, week_of_month=2, day_of_week=0, hour=8, quarter=2)
    """
    return CalendarFeatures(
        month=t.month - 1,
        week_of_month=(t.day - 1) // 7,
        day_of_week=t.weekday(),
        hour=t.hour,
        quarter=t.minute // 15,
    )


def energy_kwh(s: LoadSeries) -> float:
    """Energy under the demand curve: the sum of kW readings times the sample length in hours."""
    if len(s) == 0:
        raise SeriesError("empty series")
    return float(np.sum(s.values) * (s.cadence_minutes / 60.0))


def max_demand(s: LoadSeries) -> float:
    """Maximum 15-minute demand in kW.

    For 5-minute data this is the largest mean over any three consecutive
    samples (windows slide by one 5-minute reading). A 15-minute sample is
    already a quarter-hour demand, so the maximum sample is returned.
    """
    if len(s) == 0:
        raise SeriesError("empty series")
    v = s.values
    if s.cadence_minutes == 15:
        return float(v.max())
    if len(v) < 3:
        raise SeriesError("window underflow: a 5-minute series needs at least 3 samples")
    return float(((v[:-2] + v[1:-1] + v[2:]) / 3.0).max())


def resample_15min(s: LoadSeries) -> LoadSeries:
    """Average consecutive triples of 5-minute readings into 15-minute demand."""
    if s.cadence_minutes != 5:
        raise SeriesError(f"resample_15min expects a 5-minute series, got {s.cadence_minutes}")
    if len(s) % 3:
        raise SeriesError(f"series length {len(s)} is not divisible by 3")
    return LoadSeries(s.start, 15, s.values.reshape(-1, 3).mean(axis=1))


def _parse_number(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise CsvParseError(f"row {row}: {column} value {text!r} is not a number") from None
    if not math.isfinite(value) or value < 0:
        raise CsvParseError(f"row {row}: {column} value {text!r} must be finite and non-negative")
    return value


def _read_rows(path, header: tuple[str, ...]):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}: file is empty") from None
        if tuple(c.strip() for c in first) != header:
            raise CsvParseError(f"{path}: expected header {','.join(header)!r}, got {','.join(first)!r}")
        # Row numbers are 1-based file lines, header included.
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise CsvParseError(f"row {lineno}: expected {len(header)} columns, got {len(row)}")
            yield lineno, [c.strip() for c in row]


def load_csv(path) -> LoadSeries:
    """Read a ``timestamp,kw`` file into a :class:`LoadSeries`.

    The cadence is inferred from the first two rows and every later row must
    follow it exactly; gaps raise :class:`CadenceError`.
    """
    rows: list[tuple[int, datetime, float]] = []
    for lineno, (ts, kw) in _read_rows(path, LOAD_CSV_HEADER):
        try:
            t = datetime.fromisoformat(ts)
        except ValueError:
            raise CsvParseError(f"row {lineno}: bad timestamp {ts!r}") from None
        rows.append((lineno, t, _parse_number(kw, lineno, "kw")))
    if not rows:
        raise CsvParseError(f"{path}: no data rows")
    step = rows[1][1] - rows[0][1] if len(rows) > 1 else timedelta(minutes=15)
    if step not in [timedelta(minutes=c) for c in VALID_CADENCES]:
        raise CadenceError(f"cadence violation at row {rows[1][0]}: step {step} is not 5 or 15 minutes")
    for (_, prev, _), (lineno, t, _) in zip(rows, rows[1:]):
        if t - prev != step:
            raise CadenceError(
                f"cadence violation at row {lineno}: expected {(prev + step).isoformat()}, got {t.isoformat()}"
            )
    return LoadSeries(rows[0][1], int(step.total_seconds() // 60), [v for _, _, v in rows])


def load_production_csv(path) -> ProductionSeries:
    """Read a ``date,anodes_tmh,acid_tmh,oxygen_tmh`` file of consecutive days."""
    days: list[date] = []
    rows: list[list[float]] = []
    for lineno, (d, *rates) in _read_rows(path, PRODUCTION_CSV_HEADER):
        try:
            day = date.fromisoformat(d)
        except ValueError:
            raise CsvParseError(f"row {lineno}: bad date {d!r}") from None
        if days and day - days[-1] != timedelta(days=1):
            raise CadenceError(
                f"cadence violation at row {lineno}: expected {(days[-1] + timedelta(days=1)).isoformat()}, "
                f"got {day.isoformat()}"
            )
        rows.append([_parse_number(r, lineno, col) for r, col in zip(rates, PRODUCTION_CSV_HEADER[1:])])
        days.append(day)
    if not days:
        raise CsvParseError(f"{path}: no data rows")
    m = np.array(rows)
    return ProductionSeries(days[0], m[:, 0], m[:, 1], m[:, 2])


def write_csv(s: LoadSeries, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOAD_CSV_HEADER)
        for i, v in enumerate(s.values):
            w.writerow([s.timestamp(i).isoformat(timespec="minutes"), repr(float(v))])


def write_production_csv(p: ProductionSeries, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PRODUCTION_CSV_HEADER)
        for i, row in enumerate(p.as_matrix()):
            day = p.start_date + timedelta(days=i)
            w.writerow([day.isoformat(), *(repr(float(x)) for x in row)])
