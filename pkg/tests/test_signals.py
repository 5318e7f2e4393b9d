import math

import numpy as np
import pytest

from src.exceptions import DegenerateSignalError, GridMismatchError
from src.signals import (
    Signal,
    inner_product,
    l2_norm,
    normalize,
    random_signal,
    resample,
    uniform_grid,
)

from tests.example_systems import sinusoid_signal


class TestSignalNorms:
    """Test suite for L2 inner products and norms"""

    def test_constant_norm(self):
        """Test constant 1 on [0, 4] has norm 2"""
        assert l2_norm(Signal(uniform_grid(4.0, 10), np.ones(11))) == pytest.approx(2.0, abs=1e-12)

    def test_sine_norm(self):
        """Test sin on [0, 2 pi] has norm sqrt(pi)"""
        times = np.linspace(0.0, 2 * math.pi, 2001)
        assert l2_norm(Signal(times, np.sin(times))) == pytest.approx(math.sqrt(math.pi), abs=1e-6)

    def test_orthogonal(self):
        """Test sin and cos are orthogonal on a full period"""
        times = np.linspace(0.0, 2 * math.pi, 2001)
        assert abs(inner_product(Signal(times, np.sin(times)), Signal(times, np.cos(times)))) < 1e-6

    def test_cauchy_schwarz_and_homogeneity(self, rng):
        grid = uniform_grid(1.0, 200)
        a = sinusoid_signal(grid, 2, rng)
        b = sinusoid_signal(grid, 2, rng)
        assert abs(inner_product(a, b)) <= l2_norm(a) * l2_norm(b) + 1e-12
        assert l2_norm(a.scaled(-3.0)) == pytest.approx(3.0 * l2_norm(a), rel=1e-12)
        assert inner_product(a, a) == pytest.approx(l2_norm(a) ** 2, rel=1e-12)

    def test_refinement_changes_norm_slightly(self):
        """Test the trapezoid norm is stable under grid refinement"""
        coarse = Signal.from_function(uniform_grid(1.0, 100), lambda t: math.exp(t))
        fine = Signal.from_function(uniform_grid(1.0, 1000), lambda t: math.exp(t))
        assert abs(l2_norm(coarse) - l2_norm(fine)) < 1e-3

    def test_grid_mismatch(self):
        a = Signal(uniform_grid(1.0, 10), np.ones(11))
        b = Signal(uniform_grid(1.0, 20), np.ones(21))
        with pytest.raises(GridMismatchError):
            inner_product(a, b)
        with pytest.raises(GridMismatchError):
            a + Signal(uniform_grid(1.0, 10), np.ones((11, 2)))


class TestNormalize:
    def test_constant_two(self):
        """Test constant 2 on [0, 1] normalizes to constant 1"""
        unit = normalize(Signal(uniform_grid(1.0, 10), 2.0 * np.ones(11)))
        np.testing.assert_allclose(unit.samples, 1.0)

    def test_zero_signal(self):
        """Test normalizing zero raises"""
        with pytest.raises(DegenerateSignalError):
            normalize(Signal.zeros(uniform_grid(1.0, 10), 1))

    def test_random_signal_is_unit_and_seeded(self):
        grid = uniform_grid(2.0, 100)
        first = random_signal(grid, 3, seed=7)
        assert l2_norm(first) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_array_equal(first.samples, random_signal(grid, 3, seed=7).samples)


class TestResample:
    """Test suite for evaluation and resampling"""

    def test_same_grid_is_identity(self):
        sig = Signal(uniform_grid(1.0, 10), np.arange(11.0))
        assert resample(sig, uniform_grid(1.0, 10)) is sig

    def test_linear_signal_exact(self):
        """Test a linear signal resamples exactly"""
        sig = Signal.from_function(uniform_grid(1.0, 10), lambda t: 3.0 * t + 1.0)
        fine = resample(sig, uniform_grid(1.0, 37))
        np.testing.assert_allclose(fine.samples[:, 0], 3.0 * fine.times + 1.0, atol=1e-12)

    def test_target_outside_span(self):
        sig = Signal(uniform_grid(1.0, 10), np.ones(11))
        with pytest.raises(GridMismatchError):
            resample(sig, uniform_grid(2.0, 10))

    def test_at_outside_span(self):
        sig = Signal(uniform_grid(1.0, 10), np.ones(11))
        assert sig.at(0.55)[0] == pytest.approx(1.0)
        with pytest.raises(GridMismatchError):
            sig.at(1.5)

    def test_samples_read_only(self):
        sig = Signal(uniform_grid(1.0, 4), np.ones(5))
        with pytest.raises(ValueError):
            sig.samples[0, 0] = 2.0
