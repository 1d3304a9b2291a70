"""NARX-style recurrent demand forecaster.

The network maps a feature vector of calendar patterns, daily production
rates and the last ``n_y`` demand values to the next quarter-hour demand.
Training is series-parallel (measured lags, one step ahead); month-ahead
prediction is parallel, feeding the network's own outputs back through the
delay line.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import Sequence

import numpy as np

from .timeseries import (
    CALENDAR_MAXIMA,
    SAMPLES_PER_DAY_15MIN,
    LoadSeries,
    ProductionSeries,
    SeriesError,
    encode_calendar,
    energy_kwh,
    max_demand,
    resample_15min,
)

DEFAULT_SEED = 20071001
N_CALENDAR = 5
N_PRODUCTION = 3
# Scales derived from training data leave this much room above the observed maximum.
SCALE_HEADROOM = 1.25
MODEL_FORMAT = "demandcast-narx"
MODEL_VERSION = 1

_CAL_MAX = np.array(CALENDAR_MAXIMA, dtype=float)
_STEP = timedelta(minutes=15)


class TrainingDivergence(RuntimeError):
    pass


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class NarxConfig:
    n_y: int = 4
    hidden: tuple[int, ...] = (16,)
    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 500
    batch_size: int = 32
    seed: int = DEFAULT_SEED
    # None means "derive from the training data".
    demand_scale: float | None = None
    production_scale: tuple[float, float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.production_scale is not None:
            object.__setattr__(self, "production_scale", tuple(float(p) for p in self.production_scale))
        if self.n_y < 1:
            raise ValueError("n_y must be at least 1")
        if not self.hidden or min(self.hidden) < 1:
            raise ValueError("hidden must list at least one positive layer size")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.demand_scale is not None and not self.demand_scale > 0:
            raise ValueError("demand_scale must be positive")
        if self.production_scale is not None and (
            len(self.production_scale) != N_PRODUCTION or min(self.production_scale) <= 0
        ):
            raise ValueError("production_scale needs three positive maxima")

    @property
    def input_width(self) -> int:
        return N_CALENDAR + N_PRODUCTION + self.n_y

    @property
    def is_scaled(self) -> bool:
        return self.demand_scale is not None and self.production_scale is not None


@dataclass(frozen=True)
class FeatureVector:
    calendar: np.ndarray
    production: np.ndarray
    demand_lags: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.calendar, self.production, self.demand_lags])

    def __len__(self) -> int:
        return len(self.calendar) + len(self.production) + len(self.demand_lags)


@dataclass
class TrainingReport:
    """Full-training-set MSE; entry 0 is the untrained net, entry k follows epoch k."""

    epoch_mse: list[float] = field(default_factory=list)
    frozen_inputs: list[str] = field(default_factory=list)

    @property
    def final_mse(self) -> float:
        return self.epoch_mse[-1]

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "mse"])
            for i, m in enumerate(self.epoch_mse):
                w.writerow([i, repr(m)])


def input_names(config: NarxConfig) -> list[str]:
    return [
        "month", "week_of_month", "day_of_week", "hour", "quarter",
        "anodes", "acid", "oxygen",
        *(f"demand_lag_{k}" for k in range(1, config.n_y + 1)),
    ]


def _require_scales(config: NarxConfig) -> None:
    if not config.is_scaled:
        raise ValueError("normalization scales are unset; train the network or set them in NarxConfig")


def scale_calendar(t: datetime) -> np.ndarray:
    return np.array(encode_calendar(t), dtype=float) / _CAL_MAX


def _scale_production(config: NarxConfig, rates) -> np.ndarray:
    return np.clip(np.asarray(rates, dtype=float) / np.array(config.production_scale), 0.0, 1.0)


def _scale_demand(config: NarxConfig, kw) -> np.ndarray:
    return np.clip(np.asarray(kw, dtype=float) / config.demand_scale, 0.0, 1.0)


def build_features(
    config: NarxConfig,
    demand_history: LoadSeries | None,
    production: ProductionSeries,
    t: datetime,
    fed_back: Sequence[float] | None = None,
) -> FeatureVector:
    """Assemble the normalized network input for time ``t``.

    Demand lags are ordered most recent first. They come from ``fed_back``
    (kW, length ``n_y``) when given, otherwise from the 15-minute samples of
    ``demand_history`` immediately before ``t``.
    """
    _require_scales(config)
    if not production.covers(t.date()):
        raise SeriesError(f"production does not cover {t.date().isoformat()}")
    if fed_back is not None:
        lags = np.asarray(fed_back, dtype=float)
        if lags.shape != (config.n_y,):
            raise ValueError(f"fed_back needs {config.n_y} values, got {lags.size}")
    else:
        if demand_history is None or demand_history.cadence_minutes != 15:
            raise SeriesError("demand lags need a 15-minute demand history")
        try:
            idx = [demand_history.index_of(t - k * _STEP) for k in range(1, config.n_y + 1)]
        except SeriesError:
            raise SeriesError(
                f"demand history does not cover the {config.n_y} samples before {t.isoformat()}"
            ) from None
        lags = demand_history.values[idx]
    return FeatureVector(
        calendar=scale_calendar(t),
        production=_scale_production(config, production.rates_on(t.date())),
        demand_lags=_scale_demand(config, lags),
    )


def _exogenous_block(config: NarxConfig, start: datetime, n: int, production: ProductionSeries) -> np.ndarray:
    """(n, 8) calendar + production columns for n quarter-hours from ``start``."""
    stamps = [start + i * _STEP for i in range(n)]
    if not production.covers(stamps[0].date(), stamps[-1].date()):
        raise SeriesError(
            f"production covers {production.start_date}..{production.end_date - timedelta(days=1)}, "
            f"needed {stamps[0].date()}..{stamps[-1].date()}"
        )
    cal = np.array([encode_calendar(t) for t in stamps], dtype=float) / _CAL_MAX
    day_idx = np.array([(t.date() - production.start_date).days for t in stamps])
    prod = _scale_production(config, production.as_matrix()[day_idx])
    return np.hstack([cal, prod])


def design_matrix(config: NarxConfig, demand: LoadSeries, production: ProductionSeries):
    """Teacher-forced inputs and one-step-ahead targets, both normalized.

    Row ``k`` predicts sample ``k + n_y`` from the ``n_y`` measured samples before it.
    """
    _require_scales(config)
    if demand.cadence_minutes != 15:
        raise SeriesError("the forecaster works on 15-minute demand; resample first")
    n_y = config.n_y
    if len(demand) < n_y + 1:
        raise SeriesError(f"demand needs at least n_y + 1 = {n_y + 1} samples, got {len(demand)}")
    rows = len(demand) - n_y
    exog = _exogenous_block(config, demand.timestamp(n_y), rows, production)
    v = _scale_demand(config, demand.values)
    lags = np.column_stack([v[n_y - k : n_y - k + rows] for k in range(1, n_y + 1)])
    return np.hstack([exog, lags]), v[n_y:].copy()


class NarxNetwork:
    """Tanh hidden layers, one linear output neuron.

    ``weights`` is a list of ``(W, b)`` pairs with ``W`` shaped
    ``(fan_out, fan_in)``.
    """

    def __init__(self, config: NarxConfig | None = None, weights=None):
        self.config = config or NarxConfig()
        if weights is None:
            weights = self._initial_weights()
        self.weights = [(np.array(W, dtype=float), np.array(b, dtype=float)) for W, b in weights]
        self._check_shapes()

    def _layer_sizes(self) -> list[int]:
        return [self.config.input_width, *self.config.hidden, 1]

    def _initial_weights(self):
        rng = np.random.default_rng(self.config.seed)
        sizes = self._layer_sizes()
        out = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 0.5 / math.sqrt(fan_in)
            out.append((rng.uniform(-bound, bound, (fan_out, fan_in)), rng.uniform(-bound, bound, fan_out)))
        return out

    def _check_shapes(self) -> None:
        sizes = self._layer_sizes()
        if len(self.weights) != len(sizes) - 1:
            raise ValueError(f"expected {len(sizes) - 1} layers, got {len(self.weights)}")
        for (W, b), fan_in, fan_out in zip(self.weights, sizes[:-1], sizes[1:]):
            if W.shape != (fan_out, fan_in) or b.shape != (fan_out,):
                raise ValueError(f"layer shape {W.shape}/{b.shape} does not match {fan_in}->{fan_out}")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError("weights must be finite")

    def forward(self, x) -> float:
        """Normalized demand for one feature vector."""
        a = x.as_array() if isinstance(x, FeatureVector) else np.asarray(x, dtype=float)
        if a.shape != (self.config.input_width,):
            raise ValueError(f"input width {a.size} does not match network width {self.config.input_width}")
        for W, b in self.weights[:-1]:
            a = np.tanh(W @ a + b)
        W, b = self.weights[-1]
        return float(W[0] @ a + b[0])

    def _forward_batch(self, X: np.ndarray):
        acts = [X]
        for W, b in self.weights[:-1]:
            acts.append(np.tanh(acts[-1] @ W.T + b))
        W, b = self.weights[-1]
        return acts, acts[-1] @ W[0] + b[0]

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return self._forward_batch(np.asarray(X, dtype=float))[1]

    def mse(self, X: np.ndarray, y: np.ndarray) -> float:
        return float(np.mean((self.predict_batch(X) - y) ** 2))

    def loss_and_gradients(self, X: np.ndarray, y: np.ndarray):
        """Mean squared error over the batch and its gradients per ``(W, b)``."""
        acts, out = self._forward_batch(X)
        err = out - y
        loss = float(np.mean(err**2))
        delta = (2.0 / len(y)) * err[:, None]
        grads = []
        for layer in range(len(self.weights) - 1, -1, -1):
            W, _ = self.weights[layer]
            a_in = acts[layer]
            grads.append((delta.T @ a_in, delta.sum(axis=0)))
            if layer:
                delta = (delta @ W) * (1.0 - a_in**2)
        return loss, grads[::-1]

    def fit_scales(self, demand: LoadSeries, production: ProductionSeries) -> None:
        """Fill unset normalization scales from the training data maxima."""
        cfg = self.config
        if cfg.demand_scale is None:
            peak = float(demand.values.max()) if len(demand) else 0.0
            cfg = replace(cfg, demand_scale=SCALE_HEADROOM * peak if peak > 0 else 1.0)
        if cfg.production_scale is None:
            peaks = production.as_matrix().max(axis=0) if len(production) else np.zeros(3)
            cfg = replace(cfg, production_scale=tuple(SCALE_HEADROOM * p if p > 0 else 1.0 for p in peaks))
        self.config = cfg

    def _fold_constant_inputs(self, X: np.ndarray) -> np.ndarray:
        """Move the contribution of inputs that never vary in ``X`` into the first-layer bias.

        Such columns are indistinguishable from the bias during training, so
        whatever weight they pick up is arbitrary and would shift forecasts
        as soon as the input changes (a single training month, for one).
        The network output on ``X`` is unchanged; returns the column indices,
        whose weights then stay at zero.
        """
        frozen = np.flatnonzero(np.ptp(X, axis=0) == 0) if len(X) else np.array([], dtype=int)
        if frozen.size:
            W, b = self.weights[0]
            W = W.copy()
            b = b + W[:, frozen] @ X[0, frozen]
            W[:, frozen] = 0.0
            self.weights[0] = (W, b)
        return frozen

    def train(self, demand: LoadSeries, production: ProductionSeries) -> TrainingReport:
        """Mini-batch gradient descent with momentum on teacher-forced one-step MSE.

        Inputs that are constant over the training set are folded into the
        bias and frozen. Deterministic for a given ``config.seed``. Raises
        :class:`TrainingDivergence` if the loss stops being finite.
        """
        self.fit_scales(demand, production)
        cfg = self.config
        X, y = design_matrix(cfg, demand, production)
        frozen = self._fold_constant_inputs(X)
        rng = np.random.default_rng([cfg.seed, 1])
        velocity = [(np.zeros_like(W), np.zeros_like(b)) for W, b in self.weights]
        report = TrainingReport([self.mse(X, y)], frozen_inputs=[input_names(cfg)[c] for c in frozen])
        for epoch in range(1, cfg.epochs + 1):
            order = rng.permutation(len(y))
            for first in range(0, len(y), cfg.batch_size):
                batch = order[first : first + cfg.batch_size]
                _, grads = self.loss_and_gradients(X[batch], y[batch])
                grads[0][0][:, frozen] = 0.0
                for i, ((W, b), (gW, gb), (vW, vb)) in enumerate(zip(self.weights, grads, velocity)):
                    vW = cfg.momentum * vW - cfg.learning_rate * gW
                    vb = cfg.momentum * vb - cfg.learning_rate * gb
                    velocity[i] = (vW, vb)
                    self.weights[i] = (W + vW, b + vb)
            loss = self.mse(X, y)
            if not math.isfinite(loss):
                raise TrainingDivergence(f"divergence: training loss is {loss} at epoch {epoch}")
            report.epoch_mse.append(loss)
        return report

    def predict_month(
        self, prior_month: LoadSeries, production_plan: ProductionSeries, days: int
    ) -> LoadSeries:
        """Closed-loop forecast of ``days * 96`` quarter-hours following ``prior_month``.

        The delay line is seeded with the tail of ``prior_month`` and then fed
        the network's own outputs. Returned values are kW, clamped at zero.
        """
        cfg = self.config
        _require_scales(cfg)
        if days not in (28, 29, 30, 31):
            raise ValueError(f"days must be 28, 29, 30 or 31, got {days}")
        if prior_month.cadence_minutes == 5:
            prior_month = resample_15min(prior_month)
        if len(prior_month) < cfg.n_y:
            raise SeriesError(f"prior month needs at least {cfg.n_y} samples, got {len(prior_month)}")
        n = days * SAMPLES_PER_DAY_15MIN
        exog = _exogenous_block(cfg, prior_month.end, n, production_plan)
        delay = list(_scale_demand(cfg, prior_month.values[::-1][: cfg.n_y]))
        out = np.empty(n)
        x = np.empty(cfg.input_width)
        for i in range(n):
            x[: N_CALENDAR + N_PRODUCTION] = exog[i]
            x[N_CALENDAR + N_PRODUCTION :] = delay
            y = self.forward(x)
            out[i] = max(y, 0.0)
            delay = [min(max(y, 0.0), 1.0), *delay[:-1]]
        return LoadSeries(prior_month.end, 15, out * cfg.demand_scale)

    def weight_bytes(self) -> bytes:
        return b"".join(W.tobytes() + b.tobytes() for W, b in self.weights)

    def save(self, path) -> None:
        """Write config, normalization scales and weights as JSON.

        Floats are written with ``repr`` so loading restores identical bits.
        """
        doc = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "config": asdict(self.config),
            "layers": [{"W": W.tolist(), "b": b.tolist()} for W, b in self.weights],
        }
        Path(path).write_text(json.dumps(doc, indent=1) + "\n")

    @classmethod
    def load(cls, path) -> NarxNetwork:
        doc = json.loads(Path(path).read_text())
        if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
            raise ValueError(f"{path}: not a {MODEL_FORMAT} v{MODEL_VERSION} model file")
        cfg = doc["config"]
        cfg["hidden"] = tuple(cfg["hidden"])
        if cfg.get("production_scale") is not None:
            cfg["production_scale"] = tuple(cfg["production_scale"])
        return cls(NarxConfig(**cfg), [(layer["W"], layer["b"]) for layer in doc["layers"]])


def _as_array(s) -> np.ndarray:
    return np.asarray(s.values if isinstance(s, LoadSeries) else s, dtype=float).reshape(-1)


def erms_pct(predicted, real) -> float:
    """Mean squared relative error times 100.

    Note there is no square root: ``sum(((p - r) / r) ** 2) / N * 100``.
    """
    p, r = _as_array(predicted), _as_array(real)
    if len(p) != len(r):
        raise ValidationError(f"length mismatch: {len(p)} predicted vs {len(r)} real")
    if len(r) == 0:
        raise ValidationError("empty series")
    zeros = np.flatnonzero(r == 0)
    if zeros.size:
        raise ValidationError(f"zero denominator at index {zeros[0]}")
    return float(np.sum(((p - r) / r) ** 2) / len(r) * 100.0)


def percent_error(predicted: float, real: float, basis: str = "predicted") -> float:
    """Signed ``(predicted - real)`` as a percentage of ``predicted`` or ``real``.

    The default basis divides by the predicted aggregate, which is how the
    plant's monthly validation figures were reported (e.g. 29,239,640 kWh
    predicted against 28,336,177 kWh real gives +3.09 %).
    """
    if basis not in ("predicted", "real"):
        raise ValueError(f"basis must be 'predicted' or 'real', got {basis!r}")
    denom = predicted if basis == "predicted" else real
    if denom == 0:
        raise ValidationError(f"{basis} aggregate is zero")
    return (predicted - real) / denom * 100.0


@dataclass(frozen=True)
class ValidationReport:
    erms_pct: float
    energy_predicted_kwh: float
    energy_real_kwh: float
    energy_error_pct: float
    demand_predicted_kw: float
    demand_real_kw: float
    demand_error_pct: float
    basis: str = "predicted"

    def to_text(self) -> str:
        return "\n".join(
            [
                f"erms            {self.erms_pct:.4f}%",
                f"energy  pred    {self.energy_predicted_kwh:,.0f} kWh",
                f"energy  real    {self.energy_real_kwh:,.0f} kWh",
                f"energy  error   {self.energy_error_pct:+.2f}%",
                f"demand  pred    {self.demand_predicted_kw:,.0f} kW",
                f"demand  real    {self.demand_real_kw:,.0f} kW",
                f"demand  error   {self.demand_error_pct:+.2f}%",
                f"error basis     {self.basis}",
            ]
        )

    def write_csv(self, path) -> None:
        row = asdict(self)
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(row.keys())
            w.writerow([v if isinstance(v, str) else repr(v) for v in row.values()])


def validate(predicted: LoadSeries, real: LoadSeries, basis: str = "predicted") -> ValidationReport:
    if predicted.cadence_minutes != real.cadence_minutes:
        raise ValidationError(
            f"cadence mismatch: {predicted.cadence_minutes} vs {real.cadence_minutes} minutes"
        )
    erms = erms_pct(predicted, real)
    e_p, e_r = energy_kwh(predicted), energy_kwh(real)
    d_p, d_r = max_demand(predicted), max_demand(real)
    return ValidationReport(
        erms_pct=erms,
        energy_predicted_kwh=e_p,
        energy_real_kwh=e_r,
        energy_error_pct=percent_error(e_p, e_r, basis),
        demand_predicted_kw=d_p,
        demand_real_kw=d_r,
        demand_error_pct=percent_error(d_p, d_r, basis),
        basis=basis,
    )
