"""Analysis settings.

Settings are resolved from model defaults, an optional JSON file, and
``LTV_GAIN_*`` environment variables, in that order of precedence.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

ENV_PREFIX = "LTV_GAIN_"


class SolverSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    steps: int = Field(2000, ge=2)
    divergence_threshold: float = Field(1e9, gt=0)
    timescale_resolution: float = Field(40.0, gt=0)


class AnalysisSettings(BaseModel):
    """Knobs shared by every algorithm"""

    model_config = ConfigDict(extra="forbid")

    solver: SolverSettings = Field(default_factory=SolverSettings)
    seed: int = 0
    max_iters: int = Field(50, ge=1)
    inner_tolerance_ratio: float = Field(0.2, gt=0, le=1)
    max_outer: int = Field(10, ge=1)
    nonmonotone_rel_tol: float = Field(1e-6, ge=0)
    nonmonotone_abs_tol: float = Field(1e-8, ge=0)
    lower_bound_slack: float = Field(10.0, ge=0)
    reseed_noise: float = Field(0.01, ge=0)
    log_level: str = "INFO"

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        level = value.upper()
        if level not in ("CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG"):
            raise ValueError(f"unknown log level {value!r}")
        return level

    def with_overrides(self, overrides: Mapping[str, Any]) -> "AnalysisSettings":
        """Return a copy with nested overrides applied and re-validated"""
        merged = _deep_merge(self.model_dump(), dict(overrides))
        return _validated(merged)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "AnalysisSettings":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"cannot read settings file {path}: {e}") from e
        return _validated(data)

    @classmethod
    def load(
        cls,
        path: Optional[Union[str, Path]] = None,
        environ: Optional[Mapping[str, str]] = None,
    ) -> "AnalysisSettings":
        """Defaults, then the settings file, then the environment"""
        settings = cls.from_file(path) if path else cls()
        env_overrides = overrides_from_env(os.environ if environ is None else environ)
        if env_overrides:
            logger.debug("Settings overridden from environment: %s", sorted(env_overrides))
            settings = settings.with_overrides(env_overrides)
        return settings


def overrides_from_env(environ: Mapping[str, str]) -> Dict[str, Any]:
    """Map ``LTV_GAIN_SOLVER_STEPS=4000`` style variables onto nested keys"""
    overrides: Dict[str, Any] = {}
    solver_fields = set(SolverSettings.model_fields)
    top_fields = set(AnalysisSettings.model_fields) - {"solver"}

    for key, raw in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        name = key[len(ENV_PREFIX):].lower()
        if name.startswith("solver_") and name[len("solver_"):] in solver_fields:
            overrides.setdefault("solver", {})[name[len("solver_"):]] = raw
        elif name in top_fields:
            overrides[name] = raw
        else:
            logger.warning("Ignoring unknown setting %s", key)
    return overrides


def _validated(data: Dict[str, Any]) -> AnalysisSettings:
    try:
        return AnalysisSettings.model_validate(data)
    except ValidationError as e:
        messages = [
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        ]
        raise ConfigurationError("; ".join(messages)) from e


def _deep_merge(base: Dict[str, Any], updates: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in updates.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged
