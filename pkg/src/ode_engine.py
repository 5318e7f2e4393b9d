"""Fixed-step classical Runge-Kutta integration, forward or backward in time.

Both directions step over the same grid. Stage times are the grid points and
the interval midpoints returned by :func:`midpoints`; callers that tabulate
coefficients at exactly these floats (see :class:`StageTable`) avoid
re-evaluating them on every step.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np

from .exceptions import IntegrationError
from .linalg import check_symmetric

logger = logging.getLogger(__name__)

DEFAULT_DIVERGENCE_THRESHOLD = 1e9


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True, eq=False)
class OdeTrace:
    """States on (a contiguous part of) the grid, in ascending time order.

    A backward trace that diverged covers only ``[t_last_good, T]``; a forward
    one only ``[0, t_last_good]``. ``t_star`` is the grid time of the step at
    which divergence was declared.
    """

    times: np.ndarray
    states: np.ndarray
    diverged: bool
    direction: Direction
    t_star: Optional[float] = None
    matrix_dim: Optional[int] = None

    @property
    def final_state(self) -> np.ndarray:
        """Last state reached in integration order"""
        return self.states[-1] if self.direction is Direction.FORWARD else self.states[0]

    def matrix(self, index: int) -> np.ndarray:
        if self.matrix_dim is None:
            raise ValueError("trace does not hold matrix states")
        return unpack_symmetric(self.states[index], self.matrix_dim)

    def matrices(self) -> np.ndarray:
        return np.stack([self.matrix(k) for k in range(len(self.times))])


def midpoints(grid: np.ndarray) -> np.ndarray:
    return grid[:-1] + 0.5 * np.diff(grid)


def stage_times(grid: np.ndarray) -> np.ndarray:
    """Grid points interleaved with midpoints: t0, m0, t1, m1, ..., tN"""
    grid = np.asarray(grid, dtype=float)
    out = np.empty(2 * len(grid) - 1)
    out[0::2] = grid
    out[1::2] = midpoints(grid)
    return out


class StageTable:
    """Values tabulated at the stage times of a grid, with a slow fallback"""

    def __init__(self, grid: np.ndarray, values: Sequence[Any], fallback: Callable[[float], Any]):
        times = stage_times(grid)
        if len(values) != len(times):
            raise ValueError(f"expected {len(times)} stage values, got {len(values)}")
        self._index = {float(t): k for k, t in enumerate(times)}
        self._values = values
        self._fallback = fallback

    def __call__(self, t: float) -> Any:
        k = self._index.get(t)
        return self._values[k] if k is not None else self._fallback(t)


def check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise ValueError("grid needs at least two time points")
    if not np.all(np.isfinite(grid)) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be finite and strictly increasing")
    return grid


def rk4_integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    x0,
    grid,
    direction: Union[Direction, str] = Direction.FORWARD,
    divergence_threshold: float = DEFAULT_DIVERGENCE_THRESHOLD,
) -> OdeTrace:
    """Integrate ``x' = rhs(t, x)`` with classical RK4 over ``grid``.

    Forward runs start at ``grid[0]``, backward runs at ``grid[-1]``.
    Divergence is declared when a new state has a non-finite entry or a
    max-abs entry above ``divergence_threshold``.
    """
    grid = check_grid(grid)
    direction = Direction(direction)
    x = np.array(x0, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("initial state must be finite")

    n = len(grid)
    mids = midpoints(grid)
    states = np.empty((n, x.size))
    if direction is Direction.FORWARD:
        start, steps = 0, range(n - 1)
    else:
        start, steps = n - 1, range(n - 2, -1, -1)
    states[start] = x

    k1 = np.asarray(rhs(grid[start], x), dtype=float)
    if not np.all(np.isfinite(k1)):
        raise IntegrationError(f"non-finite derivative at the initial time t={grid[start]:.6g}")

    covered = start
    diverged = False
    t_star = None
    first = True
    for k in steps:
        if direction is Direction.FORWARD:
            t, t_next, dest = grid[k], grid[k + 1], k + 1
        else:
            t, t_next, dest = grid[k + 1], grid[k], k
        t_mid = mids[k]
        h = t_next - t

        with np.errstate(over="ignore", invalid="ignore"):
            if not first:
                k1 = rhs(t, x)
            first = False
            k2 = rhs(t_mid, x + 0.5 * h * k1)
            k3 = rhs(t_mid, x + 0.5 * h * k2)
            k4 = rhs(t_next, x + h * k3)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        if not np.all(np.isfinite(x)) or np.max(np.abs(x), initial=0.0) > divergence_threshold:
            diverged = True
            t_star = float(t_next)
            logger.debug("Integration diverged at t=%.6g (%s)", t_star, direction.value)
            break
        states[dest] = x
        covered = dest

    if direction is Direction.FORWARD:
        keep = slice(0, covered + 1)
    else:
        keep = slice(covered, n)
    return OdeTrace(
        times=grid[keep].copy(),
        states=states[keep].copy(),
        diverged=diverged,
        direction=direction,
        t_star=t_star,
    )


def pack_symmetric(matrix: np.ndarray) -> np.ndarray:
    return matrix[np.triu_indices(matrix.shape[0])]


def unpack_symmetric(vector: np.ndarray, dim: int) -> np.ndarray:
    """Rebuild a symmetric matrix from its upper triangle; exactly symmetric"""
    rows, cols = np.triu_indices(dim)
    out = np.empty((dim, dim))
    out[rows, cols] = vector
    out[cols, rows] = vector
    return out


def integrate_matrix(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    p_boundary,
    grid,
    direction: Union[Direction, str] = Direction.FORWARD,
    divergence_threshold: float = DEFAULT_DIVERGENCE_THRESHOLD,
) -> OdeTrace:
    """Integrate a symmetric matrix ODE by carrying only its upper triangle"""
    p = np.array(p_boundary, dtype=float)
    check_symmetric(p)
    dim = p.shape[0]
    rows, cols = np.triu_indices(dim)

    def packed_rhs(t: float, v: np.ndarray) -> np.ndarray:
        return rhs(t, unpack_symmetric(v, dim))[rows, cols]

    trace = rk4_integrate(packed_rhs, pack_symmetric(p), grid, direction, divergence_threshold)
    return OdeTrace(
        times=trace.times,
        states=trace.states,
        diverged=trace.diverged,
        direction=trace.direction,
        t_star=trace.t_star,
        matrix_dim=dim,
    )
