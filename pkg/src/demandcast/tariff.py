"""Flat demand + energy billing."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from .timeseries import LoadSeries, energy_kwh, max_demand

# Rates used for the smelter's monthly savings estimates.
SMELTER_DEMAND_RATE = 7.5985  # $/kW-month
SMELTER_ENERGY_RATE = 0.074  # $/kWh


def round_usd(amount: float) -> int:
    """Round half-up to whole dollars (presentation only)."""
    return int(Decimal(repr(float(amount))).quantize(Decimal(1), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class MaxDemand:
    """Bill the period's maximum 15-minute demand."""

    def billable(self, max_kw: float) -> float:
        return max_kw


@dataclass(frozen=True)
class ContractedFloor:
    """Bill the greater of the maximum demand and a contracted minimum."""

    floor_kw: float

    def __post_init__(self):
        if self.floor_kw < 0:
            raise ValueError("contracted floor must be non-negative")

    def billable(self, max_kw: float) -> float:
        return max(max_kw, self.floor_kw)


@dataclass(frozen=True)
class TariffSchedule:
    demand_rate: float = SMELTER_DEMAND_RATE
    energy_rate: float = SMELTER_ENERGY_RATE
    billable_demand_policy: MaxDemand | ContractedFloor = field(default_factory=MaxDemand)

    def __post_init__(self):
        if not self.demand_rate > 0 or not self.energy_rate > 0:
            raise ValueError("tariff rates must be positive")


def power_factor(active_kw: float, apparent_kva: float) -> float:
    """Active over apparent power."""
    if not apparent_kva > 0:
        raise ValueError("apparent power must be positive")
    if active_kw < 0 or active_kw > apparent_kva:
        raise ValueError(f"active power {active_kw} kW must lie in [0, {apparent_kva}]")
    return active_kw / apparent_kva


@dataclass(frozen=True)
class Bill:
    billable_demand_kw: float
    demand_charge_usd: float
    energy_kwh: float
    energy_charge_usd: float
    power_factor: float | None = None

    @property
    def total_usd(self) -> float:
        return self.demand_charge_usd + self.energy_charge_usd

    def rows(self) -> list[tuple[str, str]]:
        rows = [
            ("billable demand (kW)", f"{self.billable_demand_kw:,.2f}"),
            ("consumption (kWh)", f"{self.energy_kwh:,.2f}"),
            ("demand charge (US$)", f"{round_usd(self.demand_charge_usd):,}"),
            ("energy charge (US$)", f"{round_usd(self.energy_charge_usd):,}"),
            ("total (US$)", f"{round_usd(self.total_usd):,}"),
        ]
        if self.power_factor is not None:
            rows.append(("power factor", f"{self.power_factor:.3f}"))
        return rows

    def to_text(self) -> str:
        width = max(len(k) for k, _ in self.rows())
        return "\n".join(f"{k:<{width}}  {v:>16}" for k, v in self.rows())

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["billable_demand_kw", "energy_kwh", "demand_charge_usd", "energy_charge_usd", "total_usd", "power_factor"])
            w.writerow(
                [
                    repr(self.billable_demand_kw),
                    repr(self.energy_kwh),
                    repr(self.demand_charge_usd),
                    repr(self.energy_charge_usd),
                    repr(self.total_usd),
                    "" if self.power_factor is None else repr(self.power_factor),
                ]
            )


def compute_bill(
    s: LoadSeries,
    tariff: TariffSchedule | None = None,
    pf_inputs: tuple[float, float] | None = None,
) -> Bill:
    """Monthly bill for a demand series.

    ``pf_inputs`` is ``(active_kw, apparent_kva)``; the resulting power factor
    is reported on the bill but carries no charge.
    """
    tariff = tariff or TariffSchedule()
    billable = tariff.billable_demand_policy.billable(max_demand(s))
    kwh = energy_kwh(s)
    pf = power_factor(*pf_inputs) if pf_inputs is not None else None
    return Bill(
        billable_demand_kw=billable,
        demand_charge_usd=billable * tariff.demand_rate,
        energy_kwh=kwh,
        energy_charge_usd=kwh * tariff.energy_rate,
        power_factor=pf,
    )


def read_bill_csv(path) -> Bill:
    with Path(path).open(newline="") as fh:
        row = next(csv.DictReader(fh))
    return Bill(
        billable_demand_kw=float(row["billable_demand_kw"]),
        demand_charge_usd=float(row["demand_charge_usd"]),
        energy_kwh=float(row["energy_kwh"]),
        energy_charge_usd=float(row["energy_charge_usd"]),
        power_factor=float(row["power_factor"]) if row["power_factor"] else None,
    )
