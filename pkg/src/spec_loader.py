"""JSON system specifications.

A spec file describes one LTV plant plus optional solver/seed settings:

    {
      "horizon": 10.0,
      "dims": {"n_x": 2, "n_d": 1, "n_I": 1, "n_E": 0},
      "matrices": {
        "A": {"constant": [[-0.1, 0.4], [-0.5, 0.0]]},
        "B": {"gridded": {"times": [0, 10], "samples": [[[1], [0]], [[1], [0]]]}},
        ...
      },
      "solver": {"steps": 2000},
      "seed": 0
    }
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .config import AnalysisSettings
from .exceptions import SpecError
from .ltv_model import LtvSystem, TvMatrixFn, validate

logger = logging.getLogger(__name__)


def _ragged_rows(matrix: List[List[float]]) -> List[str]:
    if not matrix:
        return []
    width = len(matrix[0])
    return [
        f"row {i} has {len(row)} entries, expected {width}"
        for i, row in enumerate(matrix)
        if len(row) != width
    ]


class GriddedSource(BaseModel):
    model_config = ConfigDict(extra="forbid")

    times: List[float]
    samples: List[List[List[float]]]

    @model_validator(mode="after")
    def _rectangular(self) -> "GriddedSource":
        problems = [f"sample {k}: {p}" for k, m in enumerate(self.samples) for p in _ragged_rows(m)]
        if problems:
            raise ValueError("; ".join(problems))
        return self


class MatrixSource(BaseModel):
    """Exactly one of ``constant`` or ``gridded``"""

    model_config = ConfigDict(extra="forbid")

    constant: Optional[List[List[float]]] = None
    gridded: Optional[GriddedSource] = None

    @model_validator(mode="after")
    def _one_variant(self) -> "MatrixSource":
        if (self.constant is None) == (self.gridded is None):
            raise ValueError("give exactly one of 'constant' or 'gridded'")
        if self.constant is not None and _ragged_rows(self.constant):
            raise ValueError("; ".join(_ragged_rows(self.constant)))
        return self

    def to_fn(self, rows: int, cols: int) -> TvMatrixFn:
        # an empty JSON matrix loses one of its dimensions; take it from dims
        if self.constant is not None:
            if not self.constant:
                return TvMatrixFn.zeros(0, cols)
            if not self.constant[0]:
                return TvMatrixFn.zeros(len(self.constant), 0)
            return TvMatrixFn.constant(self.constant)
        return TvMatrixFn.gridded(self.gridded.times, self.gridded.samples)


class Dims(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_x: int = Field(ge=1)
    n_d: int = Field(ge=1)
    n_I: int = Field(0, ge=0)
    n_E: int = Field(0, ge=0)


class Matrices(BaseModel):
    model_config = ConfigDict(extra="forbid")

    A: MatrixSource
    B: MatrixSource
    C_I: Optional[MatrixSource] = None
    D_I: Optional[MatrixSource] = None
    C_E: Optional[MatrixSource] = None


class SolverOverrides(BaseModel):
    model_config = ConfigDict(extra="forbid")

    steps: Optional[int] = None
    divergence_threshold: Optional[float] = None
    timescale_resolution: Optional[float] = None


class SystemSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    horizon: float
    dims: Dims
    matrices: Matrices
    solver: SolverOverrides = Field(default_factory=SolverOverrides)
    seed: Optional[int] = None
    name: Optional[str] = None

    def to_system(self) -> LtvSystem:
        """Build the system, reporting every problem with its field path"""
        dims = self.dims
        m = self.matrices
        problems = []
        for name, dim in (("C_I", "n_I"), ("C_E", "n_E")):
            rows = getattr(dims, dim)
            if rows > 0 and getattr(m, name) is None:
                problems.append(f"matrices.{name}: required when dims.{dim} = {rows}")
        if problems:
            raise SpecError(problems)

        def source(name: str, rows: int, cols: int) -> TvMatrixFn:
            given = getattr(m, name)
            return TvMatrixFn.zeros(rows, cols) if given is None else given.to_fn(rows, cols)

        system = LtvSystem(
            A=source("A", dims.n_x, dims.n_x),
            B=source("B", dims.n_x, dims.n_d),
            C_I=source("C_I", dims.n_I, dims.n_x),
            D_I=source("D_I", dims.n_I, dims.n_d),
            C_E=source("C_E", dims.n_E, dims.n_x),
            horizon=self.horizon,
            n_x=dims.n_x,
            n_d=dims.n_d,
            n_I=dims.n_I,
            n_E=dims.n_E,
        )
        problems = validate(system)
        if problems:
            raise SpecError(problems)
        return system

    def apply_to(self, settings: AnalysisSettings) -> AnalysisSettings:
        """Layer the spec's solver block and seed over ``settings``"""
        overrides: Dict[str, Any] = {}
        solver = self.solver.model_dump(exclude_none=True)
        if solver:
            overrides["solver"] = solver
        if self.seed is not None:
            overrides["seed"] = self.seed
        return settings.with_overrides(overrides) if overrides else settings


def load_spec(path: Union[str, Path]) -> SystemSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise SpecError([f"{path}: {e.strerror or e}"]) from e
    try:
        spec = SystemSpec.model_validate_json(text)
    except ValidationError as e:
        raise SpecError([_format_error(err) for err in e.errors()]) from e
    logger.debug("Loaded system spec %s (%s)", path, spec.dims)
    return spec


def load_system(path: Union[str, Path]) -> LtvSystem:
    return load_spec(path).to_system()


def _format_error(err: Dict[str, Any]) -> str:
    location = ".".join(str(p) for p in err["loc"]) or "<root>"
    return f"{location}: {err['msg']}"
