"""State-space plant models and a fixed-step RK4 integrator.

Linear components are ``x' = A x + B u``, ``y = C x + D u``; general ones
supply ``f(x, u, t)`` and ``h(x, u)``. :func:`plant_demand` simulates a set
of components and sums their electrical draw into a :class:`LoadSeries`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .timeseries import VALID_CADENCES, LoadSeries

DEFAULT_DT = 0.01


class SimulationError(RuntimeError):
    pass


def _matrix(m, name: str) -> np.ndarray:
    arr = np.atleast_2d(np.array(m, dtype=float))
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a matrix")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    x0: np.ndarray | None = None

    def __post_init__(self):
        for name in "ABCD":
            object.__setattr__(self, name, _matrix(getattr(self, name), name))
        n, m, p = self.A.shape[0], self.B.shape[1], self.C.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got {self.A.shape}")
        if self.B.shape != (n, m):
            raise ValueError(f"B must be {n}x{m}, got {self.B.shape}")
        if self.C.shape != (p, n):
            raise ValueError(f"C must be {p}x{n}, got {self.C.shape}")
        if self.D.shape != (p, m):
            raise ValueError(f"D must be {p}x{m}, got {self.D.shape}")
        x0 = np.zeros(n) if self.x0 is None else np.array(self.x0, dtype=float).reshape(-1)
        if x0.shape != (n,) or not np.all(np.isfinite(x0)):
            raise ValueError(f"x0 must be {n} finite values")
        x0.flags.writeable = False
        object.__setattr__(self, "x0", x0)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    def with_x0(self, x0) -> StateSpaceModel:
        return StateSpaceModel(self.A, self.B, self.C, self.D, x0)

    def derivative(self, x: np.ndarray, u: np.ndarray, t: float) -> np.ndarray:
        return self.A @ x + self.B @ u

    def output(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.C @ x + self.D @ u


@dataclass(frozen=True, eq=False)
class NonlinearStateModel:
    n: int
    f: Callable[[np.ndarray, np.ndarray, float], Sequence[float]]
    h: Callable[[np.ndarray, np.ndarray], Sequence[float]]
    x0: np.ndarray | None = None
    n_inputs: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("state dimension must be at least 1")
        x0 = np.zeros(self.n) if self.x0 is None else np.array(self.x0, dtype=float).reshape(-1)
        if x0.shape != (self.n,):
            raise ValueError(f"x0 must have {self.n} values")
        x0.flags.writeable = False
        object.__setattr__(self, "x0", x0)

    @property
    def n_states(self) -> int:
        return self.n

    def derivative(self, x: np.ndarray, u: np.ndarray, t: float) -> np.ndarray:
        dx = np.asarray(self.f(x, u, t), dtype=float).reshape(-1)
        if dx.shape != (self.n,):
            raise SimulationError(f"f returned {dx.size} values, expected {self.n}")
        return dx

    def output(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.h(x, u), dtype=float).reshape(-1)


def rlc_model(R: float, L: float, C: float, x0=None) -> StateSpaceModel:
    """Series RLC circuit driven by source voltage ``u``.

    States are the loop current and the capacitor voltage; the output is the
    current. The (2,1) entry is ``1/C`` because ``i = C du_C/dt``.
    """
    if not L > 0 or not C > 0:
        raise ValueError("L and C must be positive")
    if R < 0:
        raise ValueError("R must be non-negative")
    return StateSpaceModel(
        A=[[-R / L, -1.0 / L], [1.0 / C, 0.0]],
        B=[[1.0 / L], [0.0]],
        C=[[1.0, 0.0]],
        D=[[0.0]],
        x0=x0,
    )


def rlc_stored_energy(states: np.ndarray, L: float, C: float) -> np.ndarray:
    """Inductor plus capacitor energy, ``L i^2 / 2 + C u_C^2 / 2``, per state row."""
    states = np.atleast_2d(states)
    return 0.5 * L * states[:, 0] ** 2 + 0.5 * C * states[:, 1] ** 2


def ode_to_state_space(a: Sequence[float], b: float = 1.0, x0=None) -> StateSpaceModel:
    """Companion form of ``y^(n) + a[n-1] y^(n-1) + ... + a[0] y = b u``.

    ``a`` holds ``a_0 .. a_{n-1}``; states are ``y, y', ..., y^(n-1)`` and the
    output is ``y``.
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    n = a.size
    if n == 0:
        raise ValueError("ODE order must be at least 1")
    A = np.zeros((n, n))
    A[:-1, 1:] = np.eye(n - 1)
    A[-1, :] = -a
    B = np.zeros((n, 1))
    B[-1, 0] = b
    C = np.zeros((1, n))
    C[0, 0] = 1.0
    return StateSpaceModel(A, B, C, np.zeros((1, 1)), x0)


def nth_order_model(h: Callable[..., float], n: int, x0=None, n_inputs: int = 1) -> NonlinearStateModel:
    """State model of ``y^(n) = h(y, y', ..., y^(n-1), u)`` with output ``y``."""

    def f(x, u, t):
        dx = np.empty(n)
        dx[:-1] = x[1:]
        dx[-1] = h(*x, u)
        return dx

    return NonlinearStateModel(n, f, lambda x, u: x[:1], x0, n_inputs)


def coupled_second_order(h1: Callable[..., float], h2: Callable[..., float], x0=None, n_inputs: int = 1):
    """Four-state model of ``y1'' = h1(y1, y1', y2, y2', u)``, ``y2'' = h2(...)``.

    States are ``(y1, y1', y2, y2')``; outputs are ``(y1, y2)``.
    """

    def f(x, u, t):
        return np.array([x[1], h1(x[0], x[1], x[2], x[3], u), x[3], h2(x[0], x[1], x[2], x[3], u)])

    return NonlinearStateModel(4, f, lambda x, u: np.array([x[0], x[2]]), x0, n_inputs)


class InputSignal:
    """Input ``u(t)`` from breakpoints.

    ``hold`` keeps each value until the next breakpoint; ``linear``
    interpolates between them. Both hold the end values outside the range.
    """

    def __init__(self, times: Sequence[float], values, interpolation: str = "hold"):
        self.times = np.asarray(times, dtype=float).reshape(-1)
        vals = np.asarray(values, dtype=float)
        self.values = vals.reshape(len(self.times), -1)
        if interpolation not in ("hold", "linear"):
            raise ValueError(f"interpolation must be 'hold' or 'linear', got {interpolation!r}")
        if len(self.times) == 0 or np.any(np.diff(self.times) <= 0):
            raise ValueError("breakpoint times must be non-empty and strictly increasing")
        self.interpolation = interpolation

    @classmethod
    def constant(cls, value) -> InputSignal:
        return cls([0.0], [np.atleast_1d(np.asarray(value, dtype=float))])

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def __call__(self, t: float) -> np.ndarray:
        if self.interpolation == "hold":
            i = max(int(np.searchsorted(self.times, t, side="right")) - 1, 0)
            return self.values[i]
        return np.array([np.interp(t, self.times, col) for col in self.values.T])


def _as_input(u, width: int) -> Callable[[float], np.ndarray]:
    if u is None:
        u = InputSignal.constant(np.zeros(width))
    elif not callable(u):
        u = InputSignal.constant(u)
    return lambda t: np.atleast_1d(np.asarray(u(t), dtype=float))


@dataclass(frozen=True)
class SimulationResult:
    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray

    def write_csv(self, path) -> None:
        n, p = self.states.shape[1], self.outputs.shape[1]
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_seconds", *(f"x{i + 1}" for i in range(n)), *(f"y{i + 1}" for i in range(p))])
            for t, x, y in zip(self.times, self.states, self.outputs):
                w.writerow([repr(float(t)), *(repr(float(v)) for v in x), *(repr(float(v)) for v in y)])


def read_simulation_csv(path) -> SimulationResult:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(c) for c in row] for row in reader if row])
    n = sum(1 for h in header if h.startswith("x"))
    return SimulationResult(rows[:, 0], rows[:, 1 : 1 + n], rows[:, 1 + n :])


def n_steps(t_end: float, dt: float) -> int:
    """Number of steps after t=0; tolerant of ``t_end / dt`` landing a hair below an integer."""
    return int(math.floor(t_end / dt + 1e-9))


def simulate(model, u=None, t_end: float = 1.0, dt: float = DEFAULT_DT, x0=None) -> SimulationResult:
    """Integrate ``model`` from ``x0`` with classical fourth-order Runge-Kutta.

    ``u`` may be an :class:`InputSignal`, any callable of ``t``, a constant or
    None (zero input). The result holds ``floor(t_end / dt) + 1`` samples at
    ``t = k * dt``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t_end < dt * (1 - 1e-9):
        raise ValueError("t_end must be at least dt")
    steps = n_steps(t_end, dt)
    uf = _as_input(u, model.n_inputs)
    x = np.array(model.x0 if x0 is None else x0, dtype=float).reshape(-1)
    if x.shape != (model.n_states,):
        raise ValueError(f"x0 must have {model.n_states} values")
    f = model.derivative
    times = np.arange(steps + 1) * dt
    states = np.empty((steps + 1, model.n_states))
    u0 = uf(0.0)
    y0 = model.output(x, u0)
    outputs = np.empty((steps + 1, y0.size))
    states[0], outputs[0] = x, y0
    half = 0.5 * dt
    for k in range(steps):
        t = times[k]
        u_mid = uf(t + half)
        u_end = uf(times[k + 1])
        k1 = f(x, u0, t)
        k2 = f(x + half * k1, u_mid, t + half)
        k3 = f(x + half * k2, u_mid, t + half)
        k4 = f(x + dt * k3, u_end, times[k + 1])
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise SimulationError(f"state became non-finite at t = {times[k + 1]:g} s")
        states[k + 1] = x
        outputs[k + 1] = model.output(x, u_end)
        u0 = u_end
    return SimulationResult(times, states, outputs)


@dataclass(frozen=True)
class PlantComponent:
    """One plant: a model, its input and a map from output vector to kW drawn."""

    name: str
    model: StateSpaceModel | NonlinearStateModel
    power_kw: Callable[[np.ndarray], float]
    input: object = None


@dataclass(frozen=True)
class PlantModel:
    components: Sequence[PlantComponent] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise ValueError("a plant needs at least one component")


def component_power(component: PlantComponent, t_end: float, dt: float) -> np.ndarray:
    """Per-step kW drawn by one component."""
    try:
        res = simulate(component.model, component.input, t_end, dt)
    except (SimulationError, ValueError) as exc:
        raise SimulationError(f"component {component.name!r}: {exc}") from exc
    kw = np.array([float(component.power_kw(y)) for y in res.outputs])
    bad = np.flatnonzero(~np.isfinite(kw) | (kw < 0))
    if bad.size:
        raise SimulationError(
            f"component {component.name!r}: power map gave {kw[bad[0]]!r} kW at t = {res.times[bad[0]]:g} s"
        )
    return kw


def bucket_average(kw: np.ndarray, dt: float, cadence_minutes: int) -> np.ndarray:
    """Mean of per-step samples over each complete cadence interval.

    Bucket ``j`` averages the samples at ``t = k * dt`` with ``t`` in
    ``[j * T, (j + 1) * T)``.
    """
    per_bucket = cadence_minutes * 60.0 / dt
    spb = int(round(per_bucket))
    if spb < 1 or not math.isclose(per_bucket, spb, rel_tol=1e-9):
        raise ValueError(f"dt = {dt} s does not divide a {cadence_minutes}-minute interval")
    buckets = (len(kw) - 1) // spb
    if buckets < 1:
        raise ValueError(f"simulation is shorter than one {cadence_minutes}-minute interval")
    return kw[: buckets * spb].reshape(buckets, spb).mean(axis=1)


def plant_demand(
    plant: PlantModel,
    t_end: float,
    dt: float,
    output_cadence: int = 15,
    start: datetime = datetime(2007, 10, 1),
) -> LoadSeries:
    """Simulate every component and return total plant demand at ``output_cadence``."""
    if output_cadence not in VALID_CADENCES:
        raise ValueError(f"output cadence must be one of {VALID_CADENCES}")
    total = sum(component_power(c, t_end, dt) for c in plant.components)
    return LoadSeries(start, output_cadence, bucket_average(total, dt, output_cadence))
