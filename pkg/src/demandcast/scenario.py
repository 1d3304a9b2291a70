"""Savings measures evaluated against a flat demand + energy tariff."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from decimal import Decimal
from importlib import resources
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .tariff import TariffSchedule, round_usd
from .timeseries import LoadSeries, energy_kwh

SCENARIO_HEADER = ("name", "plant", "demand_kw", "energy_kwh")
REPORT_HEADER = (
    "no", "plant", "name", "demand_reduction_kw", "energy_reduction_kwh",
    "demand_saving_usd", "energy_saving_usd", "total_saving_usd", "flagged",
)


@dataclass(frozen=True)
class Measure:
    """A proposed change with its average demand and monthly energy reductions.

    A negative demand reduction (a measure that adds load at peak) is kept
    as given, flagged, and earns no demand saving.
    """

    name: str
    plant: str
    demand_reduction_kw: float
    monthly_energy_reduction_kwh: float

    def __post_init__(self):
        if not self.name.strip():
            raise ValueError("measure name must be non-empty")
        if not np.isfinite([self.demand_reduction_kw, self.monthly_energy_reduction_kwh]).all():
            raise ValueError(f"measure {self.name!r} has non-finite reductions")

    @property
    def flagged(self) -> bool:
        return self.demand_reduction_kw < 0

    @property
    def billable_reduction_kw(self) -> float:
        return max(self.demand_reduction_kw, 0.0)


class MeasureSavings(NamedTuple):
    demand_usd: float
    energy_usd: float
    total_usd: float


def measure_savings(m: Measure, tariff: TariffSchedule | None = None) -> MeasureSavings:
    tariff = tariff or TariffSchedule()
    demand = m.billable_reduction_kw * tariff.demand_rate
    energy = m.monthly_energy_reduction_kwh * tariff.energy_rate
    return MeasureSavings(demand, energy, demand + energy)


@dataclass(frozen=True)
class ScenarioReport:
    measures: tuple[Measure, ...]
    savings: tuple[MeasureSavings, ...]

    @property
    def total_demand_kw(self) -> float:
        return sum(m.billable_reduction_kw for m in self.measures)

    @property
    def total_energy_kwh(self) -> float:
        return sum(m.monthly_energy_reduction_kwh for m in self.measures)

    @property
    def totals(self) -> MeasureSavings:
        """Unrounded column sums."""
        d = sum(s.demand_usd for s in self.savings)
        e = sum(s.energy_usd for s in self.savings)
        return MeasureSavings(d, e, d + e)

    def rounded_rows(self) -> list[tuple[int, int, int]]:
        return [tuple(round_usd(v) for v in s) for s in self.savings]

    def rounded_totals(self) -> tuple[int, int, int]:
        """Dollar totals as printed: sums of the rounded cells of each column.

        The grand total is the demand total plus the energy total, so the
        printed totals row always adds up across.
        """
        rows = self.rounded_rows()
        d = sum(r[0] for r in rows)
        e = sum(r[1] for r in rows)
        return d, e, d + e

    def to_text(self) -> str:
        head = ("No", "Plant", "Measure", "Demand kW", "Energy kWh", "Demand $", "Energy $", "Total $")
        body = []
        for i, (m, r) in enumerate(zip(self.measures, self.rounded_rows()), start=1):
            kw = f"({abs(m.demand_reduction_kw):,.0f}*)" if m.flagged else f"{m.demand_reduction_kw:,.0f}"
            body.append((str(i), m.plant, m.name, kw, f"{m.monthly_energy_reduction_kwh:,.0f}", *(f"{v:,}" for v in r)))
        body.append(
            ("", "", "MONTHLY TOTAL", f"{self.total_demand_kw:,.0f}", f"{self.total_energy_kwh:,.0f}",
             *(f"{v:,}" for v in self.rounded_totals()))
        )
        widths = [max(len(r[c]) for r in [head, *body]) for c in range(len(head))]
        fmt = lambda row: "  ".join(  # noqa: E731
            cell.ljust(w) if c in (1, 2) else cell.rjust(w) for c, (cell, w) in enumerate(zip(row, widths))
        )
        lines = [fmt(head), "  ".join("-" * w for w in widths), *map(fmt, body)]
        if any(m.flagged for m in self.measures):
            lines.append("* negative demand reduction: no demand saving credited")
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        """Table with one row per measure, rounded dollars, and a ``TOTAL`` row."""
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_HEADER)
            for i, (m, r) in enumerate(zip(self.measures, self.rounded_rows()), start=1):
                w.writerow([i, m.plant, m.name, _num(m.demand_reduction_kw), _num(m.monthly_energy_reduction_kwh), *r, int(m.flagged)])
            w.writerow(["TOTAL", "", "", _num(self.total_demand_kw), _num(self.total_energy_kwh), *self.rounded_totals(), ""])


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def scenario_report(measures: Sequence[Measure], tariff: TariffSchedule | None = None) -> ScenarioReport:
    if not measures:
        raise ValueError("a scenario needs at least one measure")
    tariff = tariff or TariffSchedule()
    return ScenarioReport(tuple(measures), tuple(measure_savings(m, tariff) for m in measures))


def read_report_csv(path) -> list[dict[str, str]]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def furnace_stoppage_savings(factor: float, stoppage_hours: float, energy_rate: float, demand_kw: float) -> float:
    """Avoided energy cost of unplanned furnace stoppages: factor * hours * $/kWh * kW.

    Evaluated in decimal arithmetic so that exactly representable inputs give
    the correctly rounded product.
    """
    args = (factor, stoppage_hours, energy_rate, demand_kw)
    if min(args) < 0:
        raise ValueError("furnace savings inputs must be non-negative")
    product = Decimal(1)
    for a in args:
        product *= Decimal(repr(float(a)))
    return float(product)


@dataclass(frozen=True)
class AppliedMeasure:
    series: LoadSeries
    implied_energy_reduction_kwh: float
    stated_energy_reduction_kwh: float

    @property
    def discrepancy_kwh(self) -> float:
        """Implied minus stated monthly energy reduction."""
        return self.implied_energy_reduction_kwh - self.stated_energy_reduction_kwh


def apply_measure(baseline: LoadSeries, m: Measure) -> AppliedMeasure:
    """Subtract the measure's average demand reduction from every sample, clamped at 0 kW."""
    after = baseline.with_values(np.clip(baseline.values - m.demand_reduction_kw, 0.0, None))
    return AppliedMeasure(
        series=after,
        implied_energy_reduction_kwh=energy_kwh(baseline) - energy_kwh(after),
        stated_energy_reduction_kwh=m.monthly_energy_reduction_kwh,
    )


def _parse_measures(fh, source: str) -> list[Measure]:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != SCENARIO_HEADER:
        raise ValueError(f"{source}: expected header {','.join(SCENARIO_HEADER)!r}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(SCENARIO_HEADER):
            raise ValueError(f"{source}: row {lineno}: expected {len(SCENARIO_HEADER)} columns")
        name, plant, kw, kwh = (c.strip() for c in row)
        try:
            out.append(Measure(name, plant, float(kw), float(kwh)))
        except ValueError as exc:
            raise ValueError(f"{source}: row {lineno}: {exc}") from None
    return out


def load_scenario(path) -> list[Measure]:
    """Read a ``name,plant,demand_kw,energy_kwh`` scenario file."""
    with Path(path).open(newline="") as fh:
        return _parse_measures(fh, str(path))


def smelter_measures() -> list[Measure]:
    """The seven smelter savings measures bundled with the package."""
    text = resources.files("demandcast").joinpath("data/smelter_measures.csv").read_text()
    return _parse_measures(io.StringIO(text), "smelter_measures.csv")
