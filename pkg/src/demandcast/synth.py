"""Seeded synthetic smelter load and production data.

Quarter-hour demand is a base load plus an hour-of-day shape, a day-of-week
offset, a term proportional to the day's production rates and iid Gaussian
noise. With ``noise_kw=0`` the series equals :func:`deterministic_load`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta

import numpy as np

from .forecaster import DEFAULT_SEED
from .timeseries import SAMPLES_PER_DAY_15MIN, LoadSeries, ProductionSeries


@dataclass(frozen=True)
class SynthParams:
    base_kw: float = 24000.0
    # kW per TM/h for anodes, acid, oxygen
    production_kw: tuple[float, float, float] = (180.0, 40.0, 90.0)
    nominal_tmh: tuple[float, float, float] = (35.0, 110.0, 49.0)
    production_spread: float = 0.06
    daily_amplitude_kw: float = 600.0
    daily_peak_hour: float = 15.0
    # Monday..Sunday offsets: a midweek plateau and a lighter weekend.
    weekday_kw: tuple[float, ...] = (150.0, 300.0, 350.0, 300.0, 150.0, -250.0, -700.0)
    noise_kw: float = 150.0


def synth_production(params: SynthParams, rng: np.random.Generator, start: date, days: int) -> ProductionSeries:
    nominal = np.array(params.nominal_tmh)
    factors = np.clip(1.0 + params.production_spread * rng.standard_normal((days, 3)), 0.0, None)
    rates = nominal * factors
    return ProductionSeries(start, rates[:, 0], rates[:, 1], rates[:, 2])


def deterministic_load(start: datetime, n: int, production: ProductionSeries, params: SynthParams) -> np.ndarray:
    """Noise-free quarter-hour demand in kW for ``n`` samples from ``start``."""
    prod = production.as_matrix() @ np.array(params.production_kw)
    out = np.empty(n)
    for i in range(n):
        t = start + timedelta(minutes=15 * i)
        hour = t.hour + t.minute / 60.0
        shape = params.daily_amplitude_kw * math.cos(2 * math.pi * (hour - params.daily_peak_hour) / 24.0)
        out[i] = (
            params.base_kw
            + shape
            + params.weekday_kw[t.weekday()]
            + prod[(t.date() - production.start_date).days]
        )
    return out


def synthesize(
    days: int,
    seed: int = DEFAULT_SEED,
    start: date = date(2007, 9, 1),
    params: SynthParams | None = None,
) -> tuple[LoadSeries, ProductionSeries]:
    """Generate ``days`` days of 15-minute demand and daily production."""
    if days < 1:
        raise ValueError("days must be at least 1")
    params = params or SynthParams()
    rng = np.random.default_rng(seed)
    production = synth_production(params, rng, start, days)
    t0 = datetime(start.year, start.month, start.day)
    n = days * SAMPLES_PER_DAY_15MIN
    values = deterministic_load(t0, n, production, params)
    if params.noise_kw:
        values = values + params.noise_kw * rng.standard_normal(n)
    return LoadSeries(t0, 15, np.clip(values, 0.0, None)), production
