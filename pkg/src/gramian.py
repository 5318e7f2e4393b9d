"""L2-to-Euclidean gains from the controllability Gramian.

With no L2 output channel, the gain from ||d|| on [0, tau] to |e_E(tau)| is
sqrt(lambda_1(Y(tau))) where Y = C_E X C_E' and X solves

    X' = A X + X A' + B B',    X(0) = 0

One forward sweep therefore yields the gain at every horizon on the grid.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np

from .config import AnalysisSettings
from .exceptions import IntegrationError, OutOfDomainError, UnreachableOutputError, UnsupportedOutputError
from .linalg import sym_eig, symmetrize
from .ltv_model import LtvSystem, SampledSystem, adjoint
from .ode_engine import Direction, OdeTrace, integrate_matrix
from .power_iteration import simulate_adjoint
from .signals import Signal

logger = logging.getLogger(__name__)

UNREACHABLE_TOL = 1e-12


def controllability_gramian(
    system: LtvSystem,
    grid: np.ndarray,
    sampled: Optional[SampledSystem] = None,
    divergence_threshold: float = math.inf,
) -> OdeTrace:
    """Forward sweep of the Lyapunov differential equation from X(0) = 0"""
    sampled = sampled if sampled is not None else system.sampled(grid)

    def rhs(t: float, X: np.ndarray) -> np.ndarray:
        A, B = sampled(t)[:2]
        AX = A @ X
        return AX + AX.T + B @ B.T

    trace = integrate_matrix(
        rhs, np.zeros((system.n_x, system.n_x)), grid, Direction.FORWARD, divergence_threshold
    )
    if trace.diverged:
        raise IntegrationError(f"Lyapunov sweep diverged at t={trace.t_star:.6g}")
    return trace


def output_gramian(C_E: np.ndarray, X: np.ndarray) -> np.ndarray:
    return symmetrize(C_E @ X @ C_E.T)


@dataclass(frozen=True, eq=False)
class GramianTrace:
    times: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    lambda1: np.ndarray
    v1: np.ndarray
    n_I: int

    def index_of(self, tau: float) -> int:
        """Grid index of tau, snapping to the nearest grid point with a warning"""
        if tau < self.times[0] or tau > self.times[-1]:
            raise OutOfDomainError(f"tau={tau:.6g} outside [0, {self.times[-1]:.6g}]")
        k = int(np.argmin(np.abs(self.times - tau)))
        if self.times[k] != tau:
            logger.warning("tau=%.10g is not a grid point; using t=%.10g", tau, self.times[k])
        return k


def solve_lde(
    system: LtvSystem,
    settings: Optional[AnalysisSettings] = None,
    grid: Optional[np.ndarray] = None,
) -> GramianTrace:
    if system.n_E < 1:
        raise ValueError("the Gramian analysis needs at least one terminal output (n_E >= 1)")
    settings = settings or AnalysisSettings()
    if grid is None:
        grid = system.analysis_grid(settings.solver.steps, settings.solver.timescale_resolution)
    sampled = system.sampled(grid)
    trace = controllability_gramian(system, grid, sampled)

    X = trace.matrices()
    C_E = sampled.on_grid()[4]
    Y = np.stack([output_gramian(c, x) for c, x in zip(C_E, X)])
    lambda1 = np.empty(len(grid))
    v1 = np.empty((len(grid), system.n_E))
    for k, y in enumerate(Y):
        eigenvalues, vectors = sym_eig(y)
        lambda1[k] = eigenvalues[0]
        v1[k] = vectors[:, 0]
    logger.debug("Lyapunov sweep done: lambda_1(Y(T))=%.10g", lambda1[-1])
    return GramianTrace(trace.times, X, Y, lambda1, v1, system.n_I)


def _require_terminal_only(n_I: int) -> None:
    if n_I != 0:
        raise UnsupportedOutputError(
            f"the Gramian gain applies to systems without an L2 output channel (n_I = 0), got n_I = {n_I}"
        )


def l2e_gain(trace: GramianTrace, tau: float) -> Tuple[float, np.ndarray]:
    """(sqrt(lambda_1(Y(tau))), unit eigenvector v1)"""
    _require_terminal_only(trace.n_I)
    k = trace.index_of(tau)
    return math.sqrt(max(trace.lambda1[k], 0.0)), trace.v1[k].copy()


def wc_disturbance_l2e(system: LtvSystem, trace: GramianTrace, tau: float) -> Signal:
    """Unit-norm disturbance on [0, tau] reaching |e_E(tau)| = gain, zero afterwards"""
    _require_terminal_only(system.n_I)
    k = trace.index_of(tau)
    lam = trace.lambda1[k]
    if lam <= UNREACHABLE_TOL:
        raise UnreachableOutputError(
            f"lambda_1(Y)={lam:.3g} at t={trace.times[k]:.6g}: no output direction is reachable"
        )
    tau_k = float(trace.times[k])
    p_tau = system.C_E(tau_k).T @ trace.v1[k] / math.sqrt(lam)
    head = trace.times[: k + 1]
    d_head = simulate_adjoint(
        adjoint(system.truncate(tau_k)), Signal.zeros(head, system.n_I), terminal_state=p_tau
    )
    samples = np.zeros((len(trace.times), system.n_d))
    samples[: k + 1] = d_head.samples
    return Signal(trace.times, samples)


def gain_profile(
    trace: GramianTrace, taus: Optional[Iterable[float]] = None, budget: float = 1.0
) -> np.ndarray:
    """Rows (tau, budget * gain, v1...) for each requested tau, or every grid time"""
    _require_terminal_only(trace.n_I)
    taus = trace.times if taus is None else list(taus)
    rows = []
    for tau in taus:
        k = trace.index_of(tau)
        gain, v1 = l2e_gain(trace, trace.times[k])
        rows.append(np.concatenate(([trace.times[k], budget * gain], v1)))
    return np.array(rows)
