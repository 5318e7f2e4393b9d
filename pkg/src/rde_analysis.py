"""Riccati-differential-equation certificates for the induced gain.

For gamma above every sigma_max(D_I(t)) the backward RDE

    -P' = A'P + PA + Q - (PB + S) R^-1 (PB + S)',    P(T) = F

with Q = C_I'C_I, S = C_I'D_I, R = D_I'D_I - gamma^2 I and F = C_E(T)'C_E(T)
has a bounded solution on [0, T] exactly when the gain is below gamma. A
solution that blows up at t* > 0 certifies gamma as a lower bound; the
worst-case feedback it defines is turned into an explicit disturbance by
:func:`construct_lower_bound_disturbance`.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .config import AnalysisSettings
from .exceptions import (
    ConstructionFailedError,
    DegenerateSignalError,
    InfeasibleGammaError,
    IntegrationError,
    UnboundedGainError,
)
from .gramian import controllability_gramian
from .linalg import max_eigenvalue, max_singular_value, solve, sym_eig, symmetrize
from .ltv_model import LtvSystem, SampledSystem, adjoint
from .ode_engine import Direction, OdeTrace, StageTable, integrate_matrix, rk4_integrate, stage_times
from .power_iteration import power_iterate, simulate_adjoint, simulate_forward
from .signals import Signal, linear_interpolate, normalize, random_signal

logger = logging.getLogger(__name__)

UPPER_BOUND_CAP = 2.0 ** 60

# Decades of max|P(t0)| at which feedback start times are tried, largest first.
START_LEVELS = (1e6, 1e4, 1e3, 1e2)


@dataclass
class GainBounds:
    """Certified bracket [gamma_lb, gamma_ub] with the disturbance behind gamma_lb"""

    gamma_lb: float
    gamma_ub: float
    d_lb: Optional[Signal] = None
    iterations: int = 0
    rde_solves: int = 0
    power_iterations: int = 0
    wall_time: float = 0.0
    converged: bool = True
    algorithm: str = "bisect"
    termination: str = "tolerance_met"

    @property
    def width(self) -> float:
        return self.gamma_ub - self.gamma_lb


class RdeCoefficients:
    """Q, S, R(gamma) and F for one system, gamma and analysis grid"""

    def __init__(
        self,
        system: LtvSystem,
        gamma: float,
        grid: Optional[np.ndarray] = None,
        sampled: Optional[SampledSystem] = None,
        settings: Optional[AnalysisSettings] = None,
    ):
        if not gamma > 0:
            raise ValueError(f"gamma must be positive, got {gamma!r}")
        settings = settings or AnalysisSettings()
        self.system = system
        self.gamma = float(gamma)
        if grid is None:
            grid = system.analysis_grid(settings.solver.steps, settings.solver.timescale_resolution)
        self.grid = grid
        self.sampled = sampled if sampled is not None else system.sampled(grid)
        C_E_T = system.C_E(system.horizon)
        self.F = symmetrize(C_E_T.T @ C_E_T)
        self.violation: Optional[Tuple[float, float]] = self._scan_feasibility()

    @property
    def feasible(self) -> bool:
        return self.violation is None

    def at(self, t: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(Q, S, R) at time t"""
        _, _, C_I, D_I, _ = self.sampled(t)
        return C_I.T @ C_I, C_I.T @ D_I, self._r(D_I)

    def _r(self, D_I: np.ndarray) -> np.ndarray:
        return symmetrize(D_I.T @ D_I) - self.gamma ** 2 * np.eye(self.system.n_d)

    def _r_max(self, t: float) -> float:
        return max_eigenvalue(self._r(self.sampled(t)[3]))

    def _scan_feasibility(self) -> Optional[Tuple[float, float]]:
        probes = _feedthrough_probes(self.system)
        peaks = [self._r_max(t) for t in probes]
        if max(peaks) < 0.0:
            return None
        for t in self.grid:
            lam = self._r_max(t)
            if lam >= 0.0:
                return float(t), lam
        worst = int(np.argmax(peaks))
        return float(probes[worst]), peaks[worst]

    def stage_table(self) -> StageTable:
        """(A, B, Q, S, R^-1) at every RK4 stage time of the grid"""
        if not self.feasible:
            raise InfeasibleGammaError(self.gamma, *self.violation)
        n_d = self.system.n_d
        constant_r_inv = None
        if self.system.D_I.is_constant:
            constant_r_inv = solve(self._r(self.system.D_I.samples[0]), np.eye(n_d))

        def entry(t: float):
            A, B, C_I, D_I, _ = self.sampled(t)
            r_inv = constant_r_inv if constant_r_inv is not None else solve(self._r(D_I), np.eye(n_d))
            return A, B, C_I.T @ C_I, C_I.T @ D_I, r_inv

        return StageTable(self.grid, [entry(t) for t in stage_times(self.grid)], entry)


def rde_coefficients(system: LtvSystem, gamma: float, **kwargs) -> RdeCoefficients:
    return RdeCoefficients(system, gamma, **kwargs)


@dataclass(frozen=True, eq=False)
class RdeSolution:
    trace: OdeTrace
    exists: bool
    t_star: Optional[float]
    gamma: float
    coefficients: RdeCoefficients = field(repr=False)

    def P(self, index: int) -> np.ndarray:
        return self.trace.matrix(index)


def solve_rde(
    system: LtvSystem,
    gamma: float,
    settings: Optional[AnalysisSettings] = None,
    grid: Optional[np.ndarray] = None,
    sampled: Optional[SampledSystem] = None,
) -> RdeSolution:
    """Integrate the RDE backward from P(T) = F and report whether it exists on [0, T]"""
    settings = settings or AnalysisSettings()
    coefficients = RdeCoefficients(system, gamma, grid=grid, sampled=sampled, settings=settings)
    if not coefficients.feasible:
        raise InfeasibleGammaError(gamma, *coefficients.violation)
    table = coefficients.stage_table()

    def rhs(t: float, P: np.ndarray) -> np.ndarray:
        A, B, Q, S, r_inv = table(t)
        gain = P @ B + S
        return -(A.T @ P + P @ A + Q - gain @ r_inv @ gain.T)

    trace = integrate_matrix(
        rhs, coefficients.F, coefficients.grid, Direction.BACKWARD, settings.solver.divergence_threshold
    )
    solution = RdeSolution(trace, not trace.diverged, trace.t_star, float(gamma), coefficients)
    logger.debug(
        "RDE probe gamma=%.10g exists=%s t_star=%s", gamma, solution.exists, solution.t_star
    )
    return solution


def feedthrough_bound(system: LtvSystem) -> float:
    """max over the knots of D_I (and both ends) of sigma_max(D_I(t))"""
    if system.n_I == 0:
        return 0.0
    return max(max_singular_value(system.D_I(t)) for t in _feedthrough_probes(system))


def _feedthrough_probes(system: LtvSystem) -> np.ndarray:
    # sigma_max of a piecewise-linear D_I peaks at a knot or an end point
    T = system.horizon
    knots = system.D_I.knots
    return np.unique(np.concatenate(([0.0, T], knots[(knots >= 0.0) & (knots <= T)])))


@dataclass
class _BoundsSearch:
    gamma_lb: float
    gamma_ub: float
    rde_solves: int


def _discover_bounds(system: LtvSystem, settings: AnalysisSettings, grid, sampled) -> _BoundsSearch:
    gamma_lb = feedthrough_bound(system)
    gamma = max(2.0 * gamma_lb, 1.0)
    solves = 0
    while gamma <= UPPER_BOUND_CAP:
        solution = solve_rde(system, gamma, settings, grid, sampled)
        solves += 1
        if solution.exists:
            logger.debug("Initial bounds [%.6g, %.6g] after %d RDE solves", gamma_lb, gamma, solves)
            return _BoundsSearch(gamma_lb, gamma, solves)
        gamma *= 2.0
    raise UnboundedGainError(f"no RDE solution up to gamma={UPPER_BOUND_CAP:.3g}")


def initial_bounds(system: LtvSystem, settings: Optional[AnalysisSettings] = None) -> Tuple[float, float]:
    """gamma_lb = max sigma_max(D_I); gamma_ub by doubling from max(2*gamma_lb, 1)"""
    settings = settings or AnalysisSettings()
    grid = system.analysis_grid(settings.solver.steps, settings.solver.timescale_resolution)
    search = _discover_bounds(system, settings, grid, system.sampled(grid))
    return search.gamma_lb, search.gamma_ub


def bisect(
    system: LtvSystem,
    tol: float,
    bounds: Optional[Tuple[float, float]] = None,
    settings: Optional[AnalysisSettings] = None,
) -> GainBounds:
    """RDE bisection down to ``gamma_ub - gamma_lb <= tol``.

    ``iterations`` counts the bisection probes; ``rde_solves`` also includes
    the bound discovery.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    settings = settings or AnalysisSettings()
    started = time.perf_counter()
    grid = system.analysis_grid(settings.solver.steps, settings.solver.timescale_resolution)
    sampled = system.sampled(grid)

    last_failure = None
    if bounds is None:
        search = _discover_bounds(system, settings, grid, sampled)
        gamma_lb, gamma_ub, solves = search.gamma_lb, search.gamma_ub, search.rde_solves
    else:
        gamma_lb, gamma_ub = map(float, bounds)
        if not 0.0 <= gamma_lb <= gamma_ub:
            raise ValueError(f"invalid bounds {bounds!r}")
        solves = 0
    logger.info("Bisecting on [%.6g, %.6g] with tol=%g", gamma_lb, gamma_ub, tol)

    bisections = 0
    while gamma_ub - gamma_lb > tol:
        gamma_try = 0.5 * (gamma_ub + gamma_lb)
        bisections += 1
        try:
            solution = solve_rde(system, gamma_try, settings, grid, sampled)
        except InfeasibleGammaError as e:
            # R(t) not negative definite: the feedthrough alone reaches gamma_try
            logger.debug("Bisection %d: %s", bisections, e)
            gamma_lb = gamma_try
            continue
        solves += 1
        if solution.exists:
            gamma_ub = gamma_try
        else:
            gamma_lb = gamma_try
            last_failure = solution
        logger.debug("Bisection %d: [%.10g, %.10g]", bisections, gamma_lb, gamma_ub)

    result = GainBounds(
        gamma_lb=gamma_lb,
        gamma_ub=gamma_ub,
        iterations=bisections,
        rde_solves=solves,
        algorithm="bisect",
    )
    _attach_lower_bound_disturbance(system, result, last_failure, tol, settings, grid)
    result.wall_time = time.perf_counter() - started
    logger.info(
        "Bisection finished: [%.6g, %.6g] after %d bisections (%d RDE solves)",
        result.gamma_lb, result.gamma_ub, bisections, solves,
    )
    return result


def _attach_lower_bound_disturbance(
    system: LtvSystem,
    result: GainBounds,
    failure: Optional[RdeSolution],
    tol: float,
    settings: AnalysisSettings,
    grid: np.ndarray,
) -> None:
    if failure is not None:
        try:
            result.d_lb = disturbance_from_incomplete_rde(system, failure, tol, settings=settings)
            return
        except ConstructionFailedError as e:
            logger.warning("%s; falling back to power iteration", e)

    seed = random_signal(grid, system.n_d, settings.seed)
    run = power_iterate(system, seed, tol=tol * settings.inner_tolerance_ratio, settings=settings)
    result.power_iterations += run.iterations
    achieved = simulate_forward(system, run.d_star).gamma_f
    if achieved >= result.gamma_lb - settings.lower_bound_slack * tol:
        result.d_lb = run.d_star
    else:
        logger.warning(
            "No disturbance reaches gamma_lb=%.6g (best %.6g); d_lb omitted", result.gamma_lb, achieved
        )


def _start_candidates(solution: RdeSolution) -> List[int]:
    """Indices into the trace of feedback start times worth trying"""
    trace = solution.trace
    coefficients = solution.coefficients
    last = len(trace.times) - 1
    peaks = np.max(np.abs(trace.states), axis=1)
    gamma2 = solution.gamma ** 2
    candidates = {2} if last > 2 else set()

    for level in START_LEVELS:
        below = np.flatnonzero(peaks <= level)
        if below.size:
            candidates.add(int(below[0]))

    # explicit RK4 on the closed loop needs h * |P| |B|^2 / gamma^2 of order one
    for j in range(last):
        h = trace.times[j + 1] - trace.times[j]
        B = coefficients.sampled(trace.times[j])[1]
        if peaks[j] * np.sum(B * B) / gamma2 * h <= 1.0:
            candidates.add(j)
            break
    return sorted(j for j in candidates if j < last)


def _steering_direction(X: np.ndarray, P: np.ndarray) -> Tuple[float, np.ndarray]:
    """Unit-steering-energy w maximising x'Px at x = Xw; returns (lambda, w)"""
    eigenvalues, vectors = sym_eig(symmetrize(X))
    cutoff = 1e-12 * max(eigenvalues[0], 0.0) if eigenvalues.size else 0.0
    keep = eigenvalues > cutoff
    if not np.any(keep):
        return 0.0, np.zeros(X.shape[0])
    roots = np.where(keep, np.sqrt(np.clip(eigenvalues, 0.0, None)), 0.0)
    inv_roots = np.where(keep, 1.0 / np.where(keep, roots, 1.0), 0.0)
    sqrt_x = (vectors * roots) @ vectors.T
    pinv_sqrt_x = (vectors * inv_roots) @ vectors.T
    lam, u = sym_eig(symmetrize(sqrt_x @ P @ sqrt_x))
    return float(lam[0]), pinv_sqrt_x @ u[:, 0]


def construct_lower_bound_disturbance(
    system: LtvSystem,
    solution: RdeSolution,
    tolerance: float,
    settings: Optional[AnalysisSettings] = None,
) -> Tuple[Signal, float]:
    """Build a unit disturbance whose gain exceeds the failed RDE's gamma.

    For each candidate start time t0 after the blow-up, a minimum-energy
    input steers x from 0 to X(t0) w, where w maximises x'P(t0)x per unit
    steering energy; on [t0, T] the worst-case feedback
    d = -R^-1 (PB + S)' x takes over. Returns the best (signal, gain) and
    raises ConstructionFailedError when none reaches
    gamma - lower_bound_slack * tolerance.
    """
    settings = settings or AnalysisSettings()
    threshold = settings.solver.divergence_threshold
    coefficients = solution.coefficients
    grid = coefficients.grid
    gamma = solution.gamma
    trace = solution.trace
    offset = len(grid) - len(trace.times)
    table = coefficients.stage_table()
    P_stack = trace.matrices()
    gramian = controllability_gramian(system, grid, coefficients.sampled)

    def P_at(t: float) -> np.ndarray:
        return linear_interpolate(trace.times, P_stack, t)

    def feedback(t: float, x: np.ndarray) -> np.ndarray:
        _, B, _, S, r_inv = table(t)
        return -r_inv @ (P_at(t) @ B + S).T @ x

    best: Tuple[Optional[Signal], float] = (None, -math.inf)
    for j in _start_candidates(solution):
        k0 = offset + j
        t0 = float(grid[k0])
        lam, w = _steering_direction(gramian.matrix(k0), P_stack[j])
        if not lam > 0.0:
            continue
        try:
            x0 = gramian.matrix(k0) @ w
            candidate = _two_phase_disturbance(system, grid, k0, w, x0, feedback, table, threshold)
            gain = simulate_forward(system, candidate, coefficients.sampled, threshold).gamma_f
        except (IntegrationError, DegenerateSignalError) as e:
            logger.debug("Start time t0=%.6g rejected: %s", t0, e)
            continue
        logger.debug("Start time t0=%.6g: lambda=%.6g gain=%.10g", t0, lam, gain)
        if gain > best[1]:
            best = (candidate, gain)

    signal, gain = best
    if signal is None or gain < gamma - settings.lower_bound_slack * tolerance:
        raise ConstructionFailedError(gamma, None if signal is None else gain)
    return signal, gain


def _two_phase_disturbance(system, grid, k0, w, x0, feedback, table, threshold) -> Signal:
    t0 = float(grid[k0])
    head = grid[: k0 + 1]
    steering = simulate_adjoint(
        adjoint(system.truncate(t0)),
        Signal.zeros(head, system.n_I),
        terminal_state=w,
        divergence_threshold=threshold,
    )

    tail = grid[k0:]

    def rhs(t: float, x: np.ndarray) -> np.ndarray:
        A, B = table(t)[:2]
        return A @ x + B @ feedback(t, x)

    loop = rk4_integrate(rhs, x0, tail, Direction.FORWARD, threshold)
    if loop.diverged:
        raise IntegrationError(f"closed loop diverged at t={loop.t_star:.6g}")
    tail_d = np.array([feedback(t, x) for t, x in zip(tail, loop.states)])

    samples = np.vstack([steering.samples[:-1], tail_d])
    return normalize(Signal(grid, samples))


def disturbance_from_incomplete_rde(
    system: LtvSystem,
    solution: RdeSolution,
    tolerance: float,
    fallback: Optional[Signal] = None,
    settings: Optional[AnalysisSettings] = None,
) -> Signal:
    """Unit disturbance certifying the lower bound behind a blown-up RDE.

    Returns ``fallback`` when the construction fails its a-posteriori gain
    check and a fallback was supplied.
    """
    if solution.exists:
        raise ValueError("the RDE solution exists on [0, T]; it certifies no lower bound")
    try:
        signal, gain = construct_lower_bound_disturbance(system, solution, tolerance, settings)
    except ConstructionFailedError as e:
        if fallback is None:
            raise
        logger.warning("%s; using the fallback disturbance", e)
        return normalize(fallback)
    logger.debug("Lower-bound disturbance for gamma=%.6g achieves %.10g", solution.gamma, gain)
    return signal
