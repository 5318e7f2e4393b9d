"""Power iteration on G~G: alternating forward and adjoint simulations.

Each pass simulates the plant under a unit disturbance, feeds its outputs
back through the adjoint, and aligns the adjoint output into the next
disturbance. The forward performance gamma_f climbs monotonically to the
induced gain; the adjoint gain gamma = ||r|| climbs to its square.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .config import AnalysisSettings
from .exceptions import DegenerateDirectionError, GridMismatchError, IntegrationError
from .ltv_model import AdjointSystem, LtvSystem, SampledSystem, adjoint
from .ode_engine import Direction, OdeTrace, StageTable, rk4_integrate
from .signals import Signal, l2_norm, normalize, random_signal

logger = logging.getLogger(__name__)


class Termination(str, Enum):
    TOLERANCE_MET = "tolerance_met"
    MAX_ITERS = "max_iters"
    NONMONOTONE_DETECTED = "nonmonotone_detected"


@dataclass(frozen=True)
class ForwardResponse:
    gamma_f: float
    e_I: Signal
    e_E_T: np.ndarray
    states: OdeTrace


@dataclass
class PowerIterResult:
    gamma_star: float
    d_star: Signal
    history: List[Tuple[float, float]] = field(default_factory=list)
    iterations: int = 0
    termination: Termination = Termination.MAX_ITERS

    @property
    def converged(self) -> bool:
        return self.termination is Termination.TOLERANCE_MET


def _require_spanning(system: LtvSystem, sig: Signal, what: str) -> None:
    if not sig.spans(system.horizon):
        raise GridMismatchError(
            f"{what} spans [{sig.times[0]:.6g}, {sig.horizon:.6g}], "
            f"expected [0, {system.horizon:.6g}]"
        )


def _same_grid(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and np.array_equal(a, b)


def simulate_forward(
    system: LtvSystem,
    d: Signal,
    sampled: Optional[SampledSystem] = None,
    divergence_threshold: float = 1e9,
) -> ForwardResponse:
    """Simulate the plant from x(0) = 0 under ``d`` on the disturbance's grid"""
    _require_spanning(system, d, "disturbance")
    if d.dim != system.n_d:
        raise GridMismatchError(f"disturbance has dimension {d.dim}, system expects {system.n_d}")
    grid = d.times
    if sampled is None or not _same_grid(sampled.grid, grid):
        sampled = system.sampled(grid)
    d_at = d.sampler()

    def rhs(t: float, x: np.ndarray) -> np.ndarray:
        A, B = sampled(t)[:2]
        return A @ x + B @ d_at(t)

    trace = rk4_integrate(rhs, np.zeros(system.n_x), grid, Direction.FORWARD, divergence_threshold)
    if trace.diverged:
        raise IntegrationError(f"forward simulation diverged at t={trace.t_star:.6g}")

    _, _, C_I, D_I, C_E = sampled.on_grid()
    e_I = np.einsum("kij,kj->ki", C_I, trace.states) + np.einsum("kij,kj->ki", D_I, d.samples)
    e_E_T = C_E[-1] @ trace.states[-1]
    e_I = Signal(grid, e_I)
    gamma_f = math.sqrt(float(e_E_T @ e_E_T) + l2_norm(e_I) ** 2)
    return ForwardResponse(gamma_f, e_I, e_E_T, trace)


def forward_gain(system: LtvSystem, d: Signal, **kwargs) -> Tuple[float, Signal, np.ndarray]:
    """(gamma_f, e_I, e_E(T)) with gamma_f = sqrt(|e_E(T)|^2 + ||e_I||^2)"""
    response = simulate_forward(system, d, **kwargs)
    return response.gamma_f, response.e_I, response.e_E_T


def simulate_adjoint(
    adj: AdjointSystem,
    q: Signal,
    w: Optional[np.ndarray] = None,
    terminal_state: Optional[np.ndarray] = None,
    table: Optional[StageTable] = None,
    divergence_threshold: float = 1e9,
) -> Signal:
    """Run the costate backward on ``q``'s grid and return r = B'p + D_I'q.

    The terminal costate is ``C_E(T)' w`` unless ``terminal_state`` gives
    p(T) directly.
    """
    grid = q.times
    if q.dim != adj.n_I:
        raise GridMismatchError(f"q has dimension {q.dim}, adjoint expects {adj.n_I}")
    if terminal_state is not None:
        p_T = np.asarray(terminal_state, dtype=float).ravel()
    else:
        w = np.zeros(adj.n_E) if w is None else np.asarray(w, dtype=float).ravel()
        if w.size != adj.n_E:
            raise GridMismatchError(f"w has dimension {w.size}, adjoint expects {adj.n_E}")
        p_T = adj.terminal_map @ w
    if table is None:
        table = adj.sampled(grid)
    q_at = q.sampler()

    def rhs(t: float, p: np.ndarray) -> np.ndarray:
        state, inp = table(t)[:2]
        return state @ p + inp @ q_at(t)

    trace = rk4_integrate(rhs, p_T, grid, Direction.BACKWARD, divergence_threshold)
    if trace.diverged:
        raise IntegrationError(f"adjoint simulation diverged at t={trace.t_star:.6g}")

    r = np.empty((len(grid), adj.n_d))
    for k, t in enumerate(grid):
        _, _, out, feed = table(t)
        r[k] = out @ trace.states[k] + feed @ q.samples[k]
    return Signal(grid, r)


def power_iterate(
    system: LtvSystem,
    d1: Optional[Signal] = None,
    max_iters: Optional[int] = None,
    tol: float = 1e-3,
    settings: Optional[AnalysisSettings] = None,
) -> PowerIterResult:
    """Power iteration for the induced gain of ``system``.

    Stops once the adjoint gain gamma rises by less than ``tol`` between
    iterations. ``d1`` defaults to a seeded random disturbance on the
    analysis grid.
    """
    settings = settings or AnalysisSettings()
    max_iters = max_iters or settings.max_iters
    threshold = settings.solver.divergence_threshold
    if tol <= 0:
        raise ValueError("tol must be positive")
    if d1 is None:
        grid = system.analysis_grid(settings.solver.steps, settings.solver.timescale_resolution)
        d1 = random_signal(grid, system.n_d, settings.seed)
    _require_spanning(system, d1, "initial disturbance")
    d = normalize(d1)
    grid = d.times

    sampled = system.sampled(grid)
    adj = adjoint(system)
    adj_table = adj.sampled(grid)

    result = PowerIterResult(gamma_star=0.0, d_star=d)
    best_gain, best_d = -math.inf, d
    gamma_prev = -math.inf
    for i in range(1, max_iters + 1):
        response = simulate_forward(system, d, sampled, threshold)
        r = simulate_adjoint(
            adj, response.e_I, w=response.e_E_T, table=adj_table, divergence_threshold=threshold
        )
        gamma = l2_norm(r)
        if not gamma > 0.0:
            raise DegenerateDirectionError(
                "adjoint output vanished; re-seed the power iteration with another disturbance"
            )
        result.history.append((response.gamma_f, gamma))
        result.iterations = i
        logger.debug("Power iteration %d: gamma_f=%.10g gamma=%.10g", i, response.gamma_f, gamma)

        if response.gamma_f > best_gain:
            best_gain, best_d = response.gamma_f, d

        slack = max(settings.nonmonotone_abs_tol, settings.nonmonotone_rel_tol * gamma_prev)
        if gamma < gamma_prev - slack:
            logger.warning(
                "Power iteration lost monotonicity at iteration %d (%.10g < %.10g); "
                "reduce the integration step size",
                i, gamma, gamma_prev,
            )
            result.gamma_star, result.d_star = best_gain, best_d
            result.termination = Termination.NONMONOTONE_DETECTED
            return result

        d = r.scaled(1.0 / gamma)
        result.gamma_star, result.d_star = response.gamma_f, d
        if gamma - gamma_prev < tol:
            result.termination = Termination.TOLERANCE_MET
            break
        gamma_prev = gamma
    else:
        logger.warning("Power iteration stopped after %d iterations without meeting tol=%g", max_iters, tol)
        result.termination = Termination.MAX_ITERS

    logger.debug(
        "Power iteration finished: gamma*=%.10g after %d iterations (%s)",
        result.gamma_star, result.iterations, result.termination.value,
    )
    return result
