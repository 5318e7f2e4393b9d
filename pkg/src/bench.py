"""Timing harness over random stable LTI systems.

For every order n_x it draws ``samples`` systems, times one RDE solve
against one power-iteration step (forward plus adjoint sweep), and
optionally the three complete algorithms at a common tolerance.
"""

import asyncio
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .combined import combined_gain
from .config import AnalysisSettings
from .ltv_model import LtvSystem, adjoint
from .power_iteration import power_iterate, simulate_adjoint, simulate_forward
from .rde_analysis import bisect, solve_rde
from .signals import Signal, random_signal

logger = logging.getLogger(__name__)

# Probe used for the T_RDE timing; systems are scaled to a gain near one.
TIMING_GAMMA = 1.5


def random_stable_system(n_x: int, rng: np.random.Generator, horizon: float = 10.0) -> LtvSystem:
    """SISO system, A = Q J Q' with J in real Schur form and Re(eig) in [-2, -0.1]"""
    J = np.zeros((n_x, n_x))
    k = 0
    while k < n_x:
        sigma = rng.uniform(-2.0, -0.1)
        if k + 1 < n_x and rng.random() < 0.5:
            omega = rng.uniform(0.0, 3.0)
            J[k:k + 2, k:k + 2] = [[sigma, omega], [-omega, sigma]]
            k += 2
        else:
            J[k, k] = sigma
            k += 1
    Q, _ = np.linalg.qr(rng.standard_normal((n_x, n_x)))
    return LtvSystem.from_matrices(
        A=Q @ J @ Q.T,
        B=rng.standard_normal((n_x, 1)),
        C_I=rng.standard_normal((1, n_x)),
        horizon=horizon,
    )


def normalized_system(system: LtvSystem, settings: AnalysisSettings) -> LtvSystem:
    """Scale C_I so that a coarse power iteration reports a gain of one"""
    gain = power_iterate(system, tol=1e-2, max_iters=20, settings=settings).gamma_star
    return LtvSystem.from_matrices(
        A=system.A.samples[0],
        B=system.B.samples[0],
        C_I=system.C_I.samples[0] / gain,
        horizon=system.horizon,
    )


@dataclass
class SampleTiming:
    n_x: int
    t_rde: float
    t_pi: float
    t_power: float = float("nan")
    t_bisect: float = float("nan")
    t_combined: float = float("nan")
    rde_solves_bisect: float = float("nan")
    rde_solves_combined: float = float("nan")


def power_step(system: LtvSystem, d: Signal) -> Signal:
    """One forward sweep and one adjoint sweep, as a single power iteration does"""
    response = simulate_forward(system, d)
    return simulate_adjoint(adjoint(system), response.e_I, w=response.e_E_T)


def _timed(fn, *args, **kwargs):
    start = time.perf_counter()
    value = fn(*args, **kwargs)
    return value, time.perf_counter() - start


def bench_sample(
    n_x: int, seed: int, horizon: float, tol: float, timing_only: bool, settings: Dict
) -> SampleTiming:
    """One random system; module-level so it can run in a worker process"""
    settings = AnalysisSettings.model_validate(settings)
    rng = np.random.default_rng(seed)
    system = normalized_system(random_stable_system(n_x, rng, horizon), settings)
    grid = system.analysis_grid(settings.solver.steps, settings.solver.timescale_resolution)
    d1 = random_signal(grid, system.n_d, seed)

    _, t_rde = _timed(solve_rde, system, TIMING_GAMMA, settings, grid)
    _, t_pi = _timed(power_step, system, d1)
    timing = SampleTiming(n_x=n_x, t_rde=t_rde, t_pi=t_pi)
    if timing_only:
        return timing

    _, timing.t_power = _timed(power_iterate, system, d1, tol=tol, settings=settings)
    bounds, timing.t_bisect = _timed(bisect, system, tol, settings=settings)
    timing.rde_solves_bisect = bounds.rde_solves
    bounds, timing.t_combined = _timed(combined_gain, system, tol, seed=seed, settings=settings)
    timing.rde_solves_combined = bounds.rde_solves
    return timing


class BenchmarkRunner:
    """Runs benchmark samples, in worker processes when ``jobs > 1``"""

    def __init__(self, jobs: int = 1):
        self.jobs = max(1, jobs)
        self.executor: Optional[ProcessPoolExecutor] = None

    async def __aenter__(self) -> "BenchmarkRunner":
        if self.jobs > 1:
            self.executor = ProcessPoolExecutor(max_workers=self.jobs)
        return self

    async def __aexit__(self, *exc_info) -> None:
        if self.executor is not None:
            self.executor.shutdown(wait=True)
            self.executor = None

    async def run_sample(self, *args) -> SampleTiming:
        if self.executor is None:
            return bench_sample(*args)
        loop = asyncio.get_running_loop()
        return await loop.run_in_executor(self.executor, bench_sample, *args)

    async def run(
        self,
        orders: Sequence[int],
        samples: int,
        horizon: float,
        seed: int,
        tol: float,
        timing_only: bool,
        settings: AnalysisSettings,
    ) -> List[Dict[str, float]]:
        payload = settings.model_dump()
        tasks = [
            self.run_sample(n_x, seed + 1000 * n_x + k, horizon, tol, timing_only, payload)
            for n_x in orders
            for k in range(samples)
        ]
        timings = await asyncio.gather(*tasks)
        return summarize(timings, orders)


def summarize(timings: Sequence[SampleTiming], orders: Sequence[int]) -> List[Dict[str, float]]:
    """Mean timings per order, with the T_RDE / T_PI ratio"""
    rows = []
    for n_x in orders:
        group = [asdict(t) for t in timings if t.n_x == n_x]
        if not group:
            continue
        mean = {key: float(np.mean([g[key] for g in group])) for key in group[0]}
        row = {"n_x": n_x, "t_rde": mean["t_rde"], "t_pi": mean["t_pi"], "ratio": mean["t_rde"] / mean["t_pi"]}
        for key in ("t_power", "t_bisect", "t_combined", "rde_solves_bisect", "rde_solves_combined"):
            if not np.isnan(mean[key]):
                row[key] = mean[key]
        rows.append(row)
        logger.info("n_x=%d: T_RDE=%.4gs T_PI=%.4gs ratio=%.3g", n_x, row["t_rde"], row["t_pi"], row["ratio"])
    return rows


async def run_bench(
    orders: Sequence[int],
    samples: int = 3,
    horizon: float = 10.0,
    seed: int = 0,
    tol: float = 1e-2,
    jobs: int = 1,
    timing_only: bool = False,
    settings: Optional[AnalysisSettings] = None,
) -> List[Dict[str, float]]:
    settings = settings or AnalysisSettings()
    async with BenchmarkRunner(jobs) as runner:
        return await runner.run(orders, samples, horizon, seed, tol, timing_only, settings)
