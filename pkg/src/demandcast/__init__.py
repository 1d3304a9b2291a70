"""Industrial demand forecasting, plant state-space simulation and tariff savings analysis."""

from .forecaster import NarxConfig, NarxNetwork, erms_pct, validate
from .scenario import Measure, furnace_stoppage_savings, measure_savings, scenario_report
from .simulator import StateSpaceModel, simulate
from .tariff import TariffSchedule, compute_bill
from .timeseries import LoadSeries, ProductionSeries, energy_kwh, max_demand

__all__ = [
    "LoadSeries", "ProductionSeries", "energy_kwh", "max_demand",
    "NarxConfig", "NarxNetwork", "erms_pct", "validate",
    "StateSpaceModel", "simulate",
    "TariffSchedule", "compute_bill",
    "Measure", "measure_savings", "scenario_report", "furnace_stoppage_savings",
]
