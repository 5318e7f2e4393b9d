"""Time-gridded vector signals with the L2[0,T] inner-product structure.

Samples live on integrator grid points and are read as piecewise linear
between them; inner products and norms use the composite trapezoid rule on
the stored grid.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import trapezoid

from .exceptions import DegenerateSignalError, GridMismatchError
from .ode_engine import StageTable, check_grid, stage_times


def linear_interpolate(times: np.ndarray, samples: np.ndarray, targets) -> np.ndarray:
    """Piecewise-linear interpolation along the first axis of ``samples``.

    Targets that coincide with a stored time return that sample exactly.
    """
    targets = np.asarray(targets, dtype=float)
    scalar = targets.ndim == 0
    targets = np.atleast_1d(targets)
    idx = np.clip(np.searchsorted(times, targets, side="right") - 1, 0, len(times) - 2)
    left, right = times[idx], times[idx + 1]
    w = (targets - left) / (right - left)
    w = w.reshape(w.shape + (1,) * (samples.ndim - 1))
    out = (1.0 - w) * samples[idx] + w * samples[idx + 1]
    return out[0] if scalar else out


@dataclass(frozen=True, eq=False)
class Signal:
    """Vector-valued samples on a strictly increasing time grid"""

    times: np.ndarray
    samples: np.ndarray

    def __post_init__(self):
        times = check_grid(self.times).copy()
        samples = np.array(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples.reshape(-1, 1)
        if samples.ndim != 2 or samples.shape[0] != len(times):
            raise ValueError(
                f"samples must have shape ({len(times)}, n), got {np.shape(self.samples)}"
            )
        if not np.all(np.isfinite(samples)):
            raise ValueError("signal samples must be finite")
        times.flags.writeable = False
        samples.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "samples", samples)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @classmethod
    def zeros(cls, times, dim: int) -> "Signal":
        return cls(times, np.zeros((len(times), dim)))

    @classmethod
    def from_function(cls, times, fn: Callable[[float], np.ndarray]) -> "Signal":
        times = np.asarray(times, dtype=float)
        return cls(times, np.array([np.atleast_1d(fn(t)) for t in times], dtype=float))

    def at(self, t: float) -> np.ndarray:
        if t < self.times[0] or t > self.times[-1]:
            raise GridMismatchError(
                f"t={t:.6g} outside signal span [{self.times[0]:.6g}, {self.times[-1]:.6g}]"
            )
        return linear_interpolate(self.times, self.samples, t)

    def scaled(self, factor: float) -> "Signal":
        return Signal(self.times, factor * self.samples)

    def sampler(self) -> StageTable:
        """Fast evaluation at the RK4 stage times of this signal's grid"""
        values = linear_interpolate(self.times, self.samples, stage_times(self.times))
        return StageTable(self.times, values, self.at)

    def spans(self, horizon: float, tol: float = 1e-12) -> bool:
        return self.times[0] == 0.0 and abs(self.times[-1] - horizon) <= tol * max(1.0, horizon)


def _check_compatible(a: Signal, b: Signal) -> None:
    if a.dim != b.dim:
        raise GridMismatchError(f"signal dimensions differ: {a.dim} vs {b.dim}")
    if a.times.shape != b.times.shape or not np.array_equal(a.times, b.times):
        raise GridMismatchError("signals live on different time grids")


def inner_product(a: Signal, b: Signal) -> float:
    _check_compatible(a, b)
    return float(trapezoid(np.einsum("ij,ij->i", a.samples, b.samples), a.times))


def l2_norm(sig: Signal) -> float:
    energy = float(trapezoid(np.einsum("ij,ij->i", sig.samples, sig.samples), sig.times))
    return math.sqrt(max(energy, 0.0))


def normalize(sig: Signal) -> Signal:
    norm = l2_norm(sig)
    if norm == 0.0:
        raise DegenerateSignalError("cannot normalize a zero signal")
    return sig.scaled(1.0 / norm)


def resample(sig: Signal, times) -> Signal:
    """Linear interpolation of ``sig`` onto ``times``"""
    times = check_grid(times)
    if times[0] < sig.times[0] or times[-1] > sig.times[-1]:
        raise GridMismatchError(
            f"target grid [{times[0]:.6g}, {times[-1]:.6g}] exceeds signal span "
            f"[{sig.times[0]:.6g}, {sig.times[-1]:.6g}]"
        )
    if times.shape == sig.times.shape and np.array_equal(times, sig.times):
        return sig
    return Signal(times, linear_interpolate(sig.times, sig.samples, times))


def random_signal(times, dim: int, seed: Optional[int] = 0) -> Signal:
    """Unit-norm pseudorandom signal from a seeded generator"""
    rng = np.random.default_rng(seed)
    times = check_grid(times)
    return normalize(Signal(times, rng.standard_normal((len(times), dim))))


def uniform_grid(horizon: float, steps: int) -> np.ndarray:
    grid = np.linspace(0.0, horizon, steps + 1)
    grid[-1] = horizon
    return grid
