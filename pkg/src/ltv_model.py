"""Finite-horizon LTV systems, their adjoints, and well-posedness checks.

    x' = A(t) x + B(t) d,        x(0) = 0
    e_I = C_I(t) x + D_I(t) d
    e_E = C_E(t) x

There is deliberately no feedthrough field from d to e_E.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import block_diag as _block_diag

from .exceptions import InvalidSystemError, OutOfDomainError
from .linalg import max_singular_value
from .ode_engine import StageTable, stage_times
from .signals import linear_interpolate, uniform_grid

logger = logging.getLogger(__name__)

# Tolerance on "the grid covers [0, T]" when T comes from a file.
HORIZON_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TvMatrixFn:
    """A constant or gridded (piecewise-linear) matrix-valued function of time.

    Construction is lenient so that :func:`validate` can report problems;
    use the ``constant``/``gridded`` factories.
    """

    samples: Tuple[np.ndarray, ...]
    times: Optional[np.ndarray] = None
    _stack: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        samples = tuple(_frozen(np.array(s, dtype=float, ndmin=2)) for s in self.samples)
        object.__setattr__(self, "samples", samples)
        if self.times is not None:
            object.__setattr__(self, "times", _frozen(np.array(self.times, dtype=float).ravel()))
        shapes = {s.shape for s in samples}
        if samples and len(shapes) == 1:
            object.__setattr__(self, "_stack", _frozen(np.stack(samples)))

    @classmethod
    def constant(cls, matrix) -> "TvMatrixFn":
        return cls(samples=(np.array(matrix, dtype=float, ndmin=2),))

    @classmethod
    def gridded(cls, times: Sequence[float], samples: Sequence) -> "TvMatrixFn":
        return cls(samples=tuple(np.array(s, dtype=float, ndmin=2) for s in samples), times=times)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "TvMatrixFn":
        return cls.constant(np.zeros((rows, cols)))

    @classmethod
    def from_function(cls, times: Sequence[float], fn: Callable[[float], np.ndarray]) -> "TvMatrixFn":
        """Grid an analytic matrix function, e.g. ``A(t)`` with a ``sin(t)`` entry"""
        times = np.asarray(times, dtype=float)
        return cls.gridded(times, [fn(t) for t in times])

    @property
    def is_constant(self) -> bool:
        return self.times is None

    @property
    def shape(self) -> Tuple[int, int]:
        return self.samples[0].shape if self.samples else (0, 0)

    @property
    def rows(self) -> int:
        return self.shape[0]

    @property
    def cols(self) -> int:
        return self.shape[1]

    @property
    def knots(self) -> np.ndarray:
        """Times at which the piecewise-linear source may change slope"""
        return np.empty(0) if self.is_constant else self.times

    def __call__(self, t: float) -> np.ndarray:
        if self.is_constant:
            return self.samples[0]
        if t < self.times[0] or t > self.times[-1]:
            raise OutOfDomainError(
                f"t={t:.6g} outside gridded span [{self.times[0]:.6g}, {self.times[-1]:.6g}]"
            )
        return linear_interpolate(self.times, self._stack, t)

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "TvMatrixFn":
        """Apply an entrywise-exact map (transpose, negation) to every sample"""
        return TvMatrixFn(samples=tuple(fn(s) for s in self.samples), times=self.times)

    def issues(self, path: str) -> List[str]:
        problems = []
        if not self.samples:
            return [f"{path}: no samples"]
        if len({s.shape for s in self.samples}) > 1:
            problems.append(f"{path}: samples do not share one shape")
        if not all(np.all(np.isfinite(s)) for s in self.samples):
            problems.append(f"{path}: non-finite entries")
        if self.is_constant:
            if len(self.samples) != 1:
                problems.append(f"{path}: constant source must hold exactly one matrix")
            return problems
        if len(self.times) != len(self.samples):
            problems.append(
                f"{path}: {len(self.times)} times but {len(self.samples)} samples"
            )
        if len(self.times) < 2:
            problems.append(f"{path}: gridded source needs at least two times")
        if not np.all(np.isfinite(self.times)):
            problems.append(f"{path}: non-finite times")
        elif np.any(np.diff(self.times) <= 0):
            problems.append(f"{path}: times not strictly increasing")
        return problems


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


MatrixSet = Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]


@dataclass(frozen=True, eq=False)
class LtvSystem:
    A: TvMatrixFn
    B: TvMatrixFn
    C_I: TvMatrixFn
    D_I: TvMatrixFn
    C_E: TvMatrixFn
    horizon: float
    n_x: int
    n_d: int
    n_I: int
    n_E: int

    @classmethod
    def from_matrices(
        cls,
        A,
        B,
        horizon: float,
        C_I=None,
        D_I=None,
        C_E=None,
    ) -> "LtvSystem":
        """Build and validate a system; plain arrays become constant sources.

        Omitted output channels are absent (zero rows); an omitted ``D_I``
        with ``C_I`` present is zero.
        """
        A, B = _source(A), _source(B)
        n_x, n_d = B.rows, B.cols
        C_I = _source(C_I) if C_I is not None else TvMatrixFn.zeros(0, n_x)
        n_I = C_I.rows
        D_I = _source(D_I) if D_I is not None else TvMatrixFn.zeros(n_I, n_d)
        C_E = _source(C_E) if C_E is not None else TvMatrixFn.zeros(0, n_x)
        system = cls(A, B, C_I, D_I, C_E, float(horizon), n_x, n_d, n_I, C_E.rows)
        require_valid(system)
        return system

    def eval(self, t: float) -> MatrixSet:
        """(A, B, C_I, D_I, C_E) at time t; no extrapolation outside [0, T]"""
        if not (0.0 <= t <= self.horizon):
            raise OutOfDomainError(f"t={t:.6g} outside horizon [0, {self.horizon:.6g}]")
        return (self.A(t), self.B(t), self.C_I(t), self.D_I(t), self.C_E(t))

    def sources(self) -> Tuple[TvMatrixFn, ...]:
        return (self.A, self.B, self.C_I, self.D_I, self.C_E)

    def truncate(self, horizon: float) -> "LtvSystem":
        """The same plant restricted to [0, horizon]"""
        if not (0.0 < horizon <= self.horizon):
            raise OutOfDomainError(f"cannot truncate to {horizon:.6g} (horizon {self.horizon:.6g})")
        return LtvSystem(self.A, self.B, self.C_I, self.D_I, self.C_E, float(horizon),
                         self.n_x, self.n_d, self.n_I, self.n_E)

    def shortest_timescale(self) -> float:
        """1 / max sigma_max(A) over the knots of A (inf for A = 0)"""
        peak = max(max_singular_value(s) for s in self.A.samples)
        return math.inf if peak == 0.0 else 1.0 / peak

    def analysis_grid(self, steps: int = 2000, resolution: float = 40.0) -> np.ndarray:
        """Uniform grid with max(steps, ceil(resolution * T / timescale)) steps"""
        timescale = self.shortest_timescale()
        needed = 0 if math.isinf(timescale) else math.ceil(resolution * self.horizon / timescale)
        return uniform_grid(self.horizon, max(steps, needed))

    def sampled(self, grid: np.ndarray) -> "SampledSystem":
        return SampledSystem(self, grid)


def _source(value) -> TvMatrixFn:
    return value if isinstance(value, TvMatrixFn) else TvMatrixFn.constant(value)


def block_diag(*systems: LtvSystem, scales: Optional[Sequence[float]] = None) -> LtvSystem:
    """Parallel interconnection diag(c1*G1, c2*G2, ...) of constant systems.

    Scales multiply the output matrices. Only constant sources are supported.
    """
    scales = list(scales) if scales is not None else [1.0] * len(systems)
    if any(not s.is_constant for g in systems for s in g.sources()):
        raise ValueError("block_diag supports constant systems only")
    horizons = {g.horizon for g in systems}
    if len(horizons) != 1:
        raise ValueError("block_diag needs systems with equal horizons")

    def stacked(pick, scaled: bool) -> np.ndarray:
        blocks = [(c if scaled else 1.0) * pick(g).samples[0] for g, c in zip(systems, scales)]
        return _block_diag(*blocks)

    return LtvSystem.from_matrices(
        A=stacked(lambda g: g.A, False),
        B=stacked(lambda g: g.B, False),
        C_I=stacked(lambda g: g.C_I, True),
        D_I=stacked(lambda g: g.D_I, True),
        C_E=stacked(lambda g: g.C_E, True),
        horizon=horizons.pop(),
    )


@dataclass(frozen=True, eq=False)
class AdjointSystem:
    """Costate dynamics run backward from ``p(T) = C_E(T)' w``:

        p' = -A' p - C_I' q,    r = B' p + D_I' q
    """

    state: TvMatrixFn
    input: TvMatrixFn
    output: TvMatrixFn
    feedthrough: TvMatrixFn
    terminal_map: np.ndarray
    horizon: float
    n_x: int
    n_d: int
    n_I: int
    n_E: int

    def eval(self, t: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        if not (0.0 <= t <= self.horizon):
            raise OutOfDomainError(f"t={t:.6g} outside horizon [0, {self.horizon:.6g}]")
        return (self.state(t), self.input(t), self.output(t), self.feedthrough(t))

    def sampled(self, grid: np.ndarray) -> StageTable:
        return _tabulate(self.eval, grid)


def adjoint(system: LtvSystem) -> AdjointSystem:
    require_valid(system)
    return AdjointSystem(
        state=system.A.map(lambda m: -m.T),
        input=system.C_I.map(lambda m: -m.T),
        output=system.B.map(lambda m: m.T),
        feedthrough=system.D_I.map(lambda m: m.T),
        terminal_map=_frozen(np.array(system.C_E(system.horizon).T)),
        horizon=system.horizon,
        n_x=system.n_x,
        n_d=system.n_d,
        n_I=system.n_I,
        n_E=system.n_E,
    )


class SampledSystem:
    """System matrices tabulated at the RK4 stage times of one grid"""

    def __init__(self, system: LtvSystem, grid: np.ndarray):
        self.system = system
        self.grid = grid
        self._table = _tabulate(system.eval, grid)
        self._on_grid: Optional[MatrixSet] = None

    def __call__(self, t: float) -> MatrixSet:
        return self._table(t)

    def on_grid(self) -> MatrixSet:
        """(A, B, C_I, D_I, C_E) stacked over the grid points, shape (N+1, rows, cols)"""
        if self._on_grid is None:
            values = [self._table(t) for t in self.grid]
            self._on_grid = tuple(np.stack([v[i] for v in values]) for i in range(5))
        return self._on_grid


def _tabulate(evaluate: Callable[[float], tuple], grid: np.ndarray) -> StageTable:
    times = stage_times(grid)
    return StageTable(grid, [evaluate(t) for t in times], evaluate)


def validate(system: LtvSystem) -> List[str]:
    """Every invariant violation, each prefixed with the offending field path"""
    problems: List[str] = []
    T = system.horizon
    if not (isinstance(T, (int, float)) and math.isfinite(T) and T > 0):
        problems.append(f"horizon: must be finite and > 0, got {T!r}")

    dims = {"n_x": system.n_x, "n_d": system.n_d, "n_I": system.n_I, "n_E": system.n_E}
    for name, value in dims.items():
        if not isinstance(value, (int, np.integer)) or value < 0:
            problems.append(f"dims.{name}: must be a nonnegative integer, got {value!r}")
    if problems:
        return problems
    if system.n_I + system.n_E < 1:
        problems.append("dims: at least one output channel is required (n_I + n_E >= 1)")

    expected = {
        "A": (system.n_x, system.n_x),
        "B": (system.n_x, system.n_d),
        "C_I": (system.n_I, system.n_x),
        "D_I": (system.n_I, system.n_d),
        "C_E": (system.n_E, system.n_x),
    }
    for name, shape in expected.items():
        source: TvMatrixFn = getattr(system, name)
        path = f"matrices.{name}"
        source_problems = source.issues(path)
        problems.extend(source_problems)
        if source.samples and len({s.shape for s in source.samples}) == 1 and source.shape != shape:
            problems.append(
                f"{path}: expected {shape[0]}x{shape[1]}, got {source.rows}x{source.cols}"
            )
        if (
            not source.is_constant
            and not source_problems
            and math.isfinite(T)
            and (source.times[0] > HORIZON_TOL or source.times[-1] < T - HORIZON_TOL * max(1.0, T))
        ):
            problems.append(
                f"{path}: grid [{source.times[0]:.6g}, {source.times[-1]:.6g}] does not cover [0, {T:.6g}]"
            )
    return problems


def require_valid(system: LtvSystem) -> None:
    problems = validate(system)
    if problems:
        raise InvalidSystemError(problems)
