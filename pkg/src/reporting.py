"""Analysis reports (JSON) and signal / gain-profile CSV files."""

import json
import logging
import math
import sys
from datetime import datetime
from pathlib import Path
from typing import IO, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel

from .power_iteration import PowerIterResult
from .rde_analysis import GainBounds
from .signals import Signal

logger = logging.getLogger(__name__)

PathOrStream = Union[str, Path, IO[str]]

CSV_FORMAT = "%.17g"


class AnalysisReport(BaseModel):
    """One analysis run; optional fields are omitted rather than null"""

    algorithm: str
    gamma_lb: float
    gamma_ub: Optional[float] = None
    iterations: int
    rde_solves: Optional[int] = None
    power_iterations: Optional[int] = None
    wall_time_s: float
    termination: str
    converged: bool
    tolerance: float
    seed: Optional[int] = None
    history_length: Optional[int] = None
    disturbance_csv: Optional[str] = None
    system: Optional[str] = None
    created_at: str = ""

    @classmethod
    def from_bounds(cls, bounds: GainBounds, tolerance: float, **extra) -> "AnalysisReport":
        return cls(
            algorithm=bounds.algorithm,
            gamma_lb=bounds.gamma_lb,
            gamma_ub=bounds.gamma_ub if math.isfinite(bounds.gamma_ub) else None,
            iterations=bounds.iterations,
            rde_solves=bounds.rde_solves,
            power_iterations=bounds.power_iterations,
            wall_time_s=bounds.wall_time,
            termination=bounds.termination,
            converged=bounds.converged,
            tolerance=tolerance,
            created_at=datetime.now().isoformat(),
            **extra,
        )

    @classmethod
    def from_power(
        cls, result: PowerIterResult, tolerance: float, wall_time: float, **extra
    ) -> "AnalysisReport":
        return cls(
            algorithm="power",
            gamma_lb=result.gamma_star,
            iterations=result.iterations,
            power_iterations=result.iterations,
            wall_time_s=wall_time,
            termination=result.termination.value,
            converged=result.converged,
            tolerance=tolerance,
            history_length=len(result.history),
            created_at=datetime.now().isoformat(),
            **extra,
        )

    def to_json(self) -> str:
        return json.dumps(self.model_dump(exclude_none=True), indent=2)


def write_report(report: AnalysisReport, path: Optional[Union[str, Path]] = None) -> None:
    """Write the report to ``path``, or to standard output"""
    if path is None:
        print(report.to_json())
        return
    Path(path).write_text(report.to_json() + "\n")
    logger.info("Report written to %s", path)


def _save_csv(target: PathOrStream, header: Sequence[str], rows: np.ndarray) -> None:
    if target == "-":
        target = sys.stdout
    np.savetxt(target, rows, fmt=CSV_FORMAT, delimiter=",", header=",".join(header), comments="")


def write_signal_csv(signal: Signal, target: PathOrStream) -> None:
    """One row per grid time: t, d1, ..., dn"""
    header = ["t"] + [f"d{i + 1}" for i in range(signal.dim)]
    _save_csv(target, header, np.column_stack([signal.times, signal.samples]))


def read_signal_csv(path: Union[str, Path]) -> Signal:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Signal(data[:, 0], data[:, 1:])


def write_gain_profile_csv(rows: np.ndarray, target: PathOrStream) -> None:
    """Rows (tau, gain, v1_1, ..., v1_nE) as produced by ``gramian.gain_profile``"""
    rows = np.atleast_2d(rows)
    header = ["tau", "gain"] + [f"v1_{i + 1}" for i in range(rows.shape[1] - 2)]
    _save_csv(target, header, rows)


def write_bench_csv(rows: List[dict], target: PathOrStream) -> None:
    if not rows:
        return
    header = list(rows[0])
    _save_csv(target, header, np.array([[row[key] for key in header] for row in rows], dtype=float))
