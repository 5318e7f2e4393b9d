import numpy as np
import pytest

from src.config import AnalysisSettings, SolverSettings


@pytest.fixture
def settings():
    """Default settings (2000 steps)"""
    return AnalysisSettings()


@pytest.fixture
def coarse_settings():
    """Coarser grid for the randomized sweeps"""
    return AnalysisSettings(solver=SolverSettings(steps=400))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
