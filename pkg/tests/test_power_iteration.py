import math
from unittest.mock import patch

import numpy as np
import pytest

from src.exceptions import DegenerateDirectionError, GridMismatchError
from src.ltv_model import LtvSystem, adjoint
from src.power_iteration import (
    Termination,
    forward_gain,
    power_iterate,
    simulate_adjoint,
    simulate_forward,
)
from src.signals import Signal, inner_product, l2_norm, normalize, random_signal, uniform_grid

from tests.example_systems import (
    G1_GAIN,
    SCALAR_L2E_GAIN,
    g1,
    g2,
    memoryless,
    random_ltv,
    scalar_lag,
    sinusoid_signal,
)


class TestForwardGain:
    """Test suite for forward simulation"""

    def test_zero_system(self):
        """Test B = 0 and D_I = 0 gives zero gain"""
        system = LtvSystem.from_matrices(A=[[-1.0]], B=[[0.0]], C_I=[[1.0]], D_I=[[0.0]], horizon=1.0)
        gain, e_I, _ = forward_gain(system, random_signal(uniform_grid(1.0, 100), 1))
        assert gain == 0.0
        np.testing.assert_array_equal(e_I.samples, 0.0)

    def test_memoryless(self):
        """Test e_I = 2 d has gain 2 for any unit d"""
        gain, _, _ = forward_gain(memoryless(2.0), random_signal(uniform_grid(1.0, 100), 1, seed=3))
        assert gain == pytest.approx(2.0, abs=1e-12)

    def test_scalar_exponential_input(self):
        """Test the exponential input attains sqrt((1 - e^-2) / 2) on the scalar lag"""
        d = normalize(Signal.from_function(uniform_grid(1.0, 1000), lambda t: math.exp(t - 1.0)))
        gain, _, e_E_T = forward_gain(scalar_lag(), d)
        assert gain == pytest.approx(SCALAR_L2E_GAIN, abs=1e-4)
        assert e_E_T.shape == (1,)

    def test_horizon_mismatch(self):
        with pytest.raises(GridMismatchError):
            forward_gain(g1(), random_signal(uniform_grid(5.0, 100), 1))

    def test_dimension_mismatch(self):
        with pytest.raises(GridMismatchError):
            forward_gain(g1(), random_signal(uniform_grid(10.0, 100), 2))


class TestAdjointDuality:
    """Test suite for <G d, e> = <d, G~ e> on random systems"""

    def test_duality(self, rng):
        """Test the adjoint pairing holds on 20 random systems"""
        grid = uniform_grid(1.0, 1000)
        for _ in range(20):
            n_x, n_d = rng.integers(1, 4), rng.integers(1, 3)
            system = random_ltv(rng, n_x=n_x, n_d=n_d, n_I=rng.integers(1, 3), n_E=rng.integers(0, 3))
            d = sinusoid_signal(grid, system.n_d, rng)
            q = sinusoid_signal(grid, system.n_I, rng)
            w = rng.standard_normal(system.n_E)

            response = simulate_forward(system, d)
            r = simulate_adjoint(adjoint(system), q, w=w)
            lhs = inner_product(response.e_I, q) + float(response.e_E_T @ w)
            rhs = inner_product(d, r)
            scale = max(l2_norm(d) * (l2_norm(q) + np.linalg.norm(w)), 1.0)
            assert abs(lhs - rhs) <= 1e-4 * scale


class TestPowerIterate:
    """Test suite for the power iteration"""

    def test_g1_gain(self, settings):
        """Test the G1 gain is found in a few iterations"""
        result = power_iterate(g1(), tol=1e-3, settings=settings)
        assert result.gamma_star == pytest.approx(G1_GAIN, abs=0.01)
        assert result.converged
        assert result.iterations <= 10
        assert l2_norm(result.d_star) == pytest.approx(1.0, abs=1e-10)

    def test_g1_disturbance_achieves_gain(self, settings):
        result = power_iterate(g1(), tol=1e-3, settings=settings)
        gain, _, _ = forward_gain(g1(), result.d_star)
        assert gain >= result.gamma_star - 1e-3

    def test_g2_needs_more_iterations(self, settings):
        """Test nearly repeated singular values slow the iteration down"""
        fast = power_iterate(g1(), tol=1e-3, settings=settings)
        slow = power_iterate(g2(), tol=1e-3, settings=settings)
        assert slow.gamma_star == pytest.approx(G1_GAIN, abs=0.05)
        assert slow.iterations >= 10
        assert slow.iterations > fast.iterations

    def test_monotone(self, rng, coarse_settings):
        """Test gamma and gamma_f never decrease on 20 random systems"""
        for k in range(20):
            system = random_ltv(rng, n_x=int(rng.integers(1, 4)), n_I=1, n_E=int(rng.integers(0, 2)), feedthrough=False)
            settings = coarse_settings.with_overrides({"seed": k})
            result = power_iterate(system, tol=1e-9, max_iters=6, settings=settings)
            gains = np.array(result.history)
            assert np.all(np.diff(gains[:, 0]) >= -1e-6 * gains[1:, 0])
            assert np.all(np.diff(gains[:, 1]) >= -1e-6 * gains[1:, 1])
            assert result.termination is not Termination.NONMONOTONE_DETECTED

    def test_memoryless_converges_immediately(self):
        result = power_iterate(memoryless(3.0), tol=1e-3)
        assert result.gamma_star == pytest.approx(3.0, abs=1e-9)
        assert result.iterations == 2

    def test_degenerate_direction(self):
        """Test a vanishing adjoint output asks for a re-seed"""
        system = LtvSystem.from_matrices(A=[[-1.0]], B=[[0.0]], C_I=[[1.0]], D_I=[[0.0]], horizon=1.0)
        with pytest.raises(DegenerateDirectionError):
            power_iterate(system)

    def test_max_iters(self, settings):
        result = power_iterate(g2(), tol=1e-9, max_iters=2, settings=settings)
        assert result.termination is Termination.MAX_ITERS
        assert result.iterations == 2
        assert not result.converged

    def test_nonmonotone_detected(self):
        """Test a dropping adjoint gain stops the iteration with the best iterate"""
        system = memoryless(1.0)
        grid = uniform_grid(1.0, 100)
        outputs = [Signal(grid, 2.0 * np.ones(101)), Signal(grid, np.ones(101))]
        with patch("src.power_iteration.simulate_adjoint", side_effect=outputs):
            result = power_iterate(system, random_signal(grid, 1), tol=1e-6)
        assert result.termination is Termination.NONMONOTONE_DETECTED
        assert result.iterations == 2
        assert result.gamma_star == pytest.approx(1.0, abs=1e-12)

    def test_seeded_start_is_reproducible(self, coarse_settings):
        first = power_iterate(g1(), tol=1e-3, settings=coarse_settings)
        second = power_iterate(g1(), tol=1e-3, settings=coarse_settings)
        assert first.history == second.history
