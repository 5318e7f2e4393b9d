import logging
import math

import numpy as np
import pytest

from src.combined import combined_gain
from src.exceptions import OutOfDomainError, UnreachableOutputError, UnsupportedOutputError
from src.gramian import gain_profile, l2e_gain, output_gramian, solve_lde, wc_disturbance_l2e
from src.linalg import sym_eig
from src.ltv_model import LtvSystem
from src.power_iteration import forward_gain
from src.signals import l2_norm

from tests.example_systems import (
    SCALAR_GRAMIAN_T1,
    SCALAR_L2E_GAIN,
    integrators,
    random_ltv,
    scalar_lag,
)


class TestSolveLde:
    """Test suite for the forward Lyapunov sweep"""

    def test_scalar_lag(self):
        """Test X(1) = (1 - e^-2) / 2 for x' = -x + d"""
        trace = solve_lde(scalar_lag())
        assert trace.X[-1, 0, 0] == pytest.approx(SCALAR_GRAMIAN_T1, abs=1e-6)
        assert trace.X[0, 0, 0] == 0.0

    def test_no_input(self):
        """Test B = 0 keeps X and lambda_1 at zero"""
        system = LtvSystem.from_matrices(A=[[-1.0]], B=[[0.0]], C_E=[[1.0]], horizon=1.0)
        trace = solve_lde(system)
        np.testing.assert_array_equal(trace.X, 0.0)
        np.testing.assert_array_equal(trace.lambda1, 0.0)

    def test_integrators(self):
        """Test A = 0, B = I gives X(t) = t I"""
        trace = solve_lde(integrators(np.eye(2), horizon=2.0))
        for k in (0, 500, len(trace.times) - 1):
            np.testing.assert_allclose(trace.X[k], trace.times[k] * np.eye(2), atol=1e-12)
        np.testing.assert_allclose(trace.lambda1, trace.times, atol=1e-12)

    def test_gramian_psd_and_output_consistent(self, rng, coarse_settings):
        system = random_ltv(rng, n_x=3, n_d=2, n_I=0, n_E=2)
        trace = solve_lde(system, coarse_settings)
        for k in range(0, len(trace.times), 40):
            eigenvalues, _ = sym_eig(trace.X[k])
            assert eigenvalues[-1] >= -1e-10
            np.testing.assert_allclose(trace.Y[k], output_gramian(system.C_E(trace.times[k]), trace.X[k]), atol=1e-12)

    def test_needs_terminal_output(self):
        system = LtvSystem.from_matrices(A=[[-1.0]], B=[[1.0]], C_I=[[1.0]], horizon=1.0)
        with pytest.raises(ValueError):
            solve_lde(system)


class TestL2eGain:
    """Test suite for the L2-to-Euclidean gain"""

    def test_scalar_lag(self):
        gain, v1 = l2e_gain(solve_lde(scalar_lag()), 1.0)
        assert gain == pytest.approx(SCALAR_L2E_GAIN, abs=1e-4)
        np.testing.assert_array_equal(v1, [1.0])

    def test_zero_horizon(self):
        gain, _ = l2e_gain(solve_lde(scalar_lag()), 0.0)
        assert gain == 0.0

    def test_partial_output(self):
        """Test C_E = diag(1, 0) over [0, 2] gives sqrt(2) along e1"""
        gain, v1 = l2e_gain(solve_lde(integrators(np.diag([1.0, 0.0]), horizon=2.0)), 2.0)
        assert gain == pytest.approx(math.sqrt(2.0), abs=1e-10)
        np.testing.assert_allclose(v1, [1.0, 0.0])

    def test_l2_output_out_of_scope(self):
        """Test systems with an L2 output channel are rejected"""
        system = LtvSystem.from_matrices(A=[[-1.0]], B=[[1.0]], C_I=[[1.0]], C_E=[[1.0]], horizon=1.0)
        with pytest.raises(UnsupportedOutputError):
            l2e_gain(solve_lde(system), 1.0)

    def test_off_grid_tau_snaps(self, caplog):
        trace = solve_lde(scalar_lag())
        with caplog.at_level(logging.WARNING):
            gain, _ = l2e_gain(trace, 0.50001)
        assert "not a grid point" in caplog.text
        assert gain == pytest.approx(l2e_gain(trace, trace.times[1000])[0])

    def test_tau_outside_horizon(self):
        with pytest.raises(OutOfDomainError):
            l2e_gain(solve_lde(scalar_lag()), 1.5)

    def test_gain_profile(self):
        """Test the profile of x' = d, e_E = x is sqrt(tau), scaled by the budget"""
        trace = solve_lde(integrators([[1.0]], horizon=1.0))
        rows = gain_profile(trace, [0.25, 1.0], budget=5.0)
        np.testing.assert_allclose(rows[:, 0], [0.25, 1.0])
        np.testing.assert_allclose(rows[:, 1], [2.5, 5.0], atol=1e-10)
        assert rows.shape == (2, 3)
        assert gain_profile(trace).shape == (len(trace.times), 3)


class TestWorstCaseDisturbance:
    """Test suite for the disturbance achieving the Gramian gain"""

    def test_scalar_kernel(self):
        """Test d_wc(t) = e^-(1-t) / sqrt((1 - e^-2) / 2)"""
        system = scalar_lag()
        trace = solve_lde(system)
        d = wc_disturbance_l2e(system, trace, 1.0)
        expected = np.exp(d.times - 1.0) / SCALAR_L2E_GAIN
        np.testing.assert_allclose(d.samples[:, 0], expected, atol=1e-4)
        assert l2_norm(d) == pytest.approx(1.0, abs=1e-4)

    def test_achieves_gain(self):
        system = scalar_lag()
        trace = solve_lde(system)
        gain, _, _ = forward_gain(system, wc_disturbance_l2e(system, trace, 1.0))
        assert gain == pytest.approx(l2e_gain(trace, 1.0)[0], abs=2e-3)

    def test_integrators_constant_direction(self):
        """Test A = 0, B = I, C_E = I gives a constant unit disturbance along v1"""
        system = integrators(np.eye(2))
        d = wc_disturbance_l2e(system, solve_lde(system), 1.0)
        np.testing.assert_allclose(d.samples, np.tile([1.0, 0.0], (len(d.times), 1)), atol=1e-12)

    def test_unreachable(self):
        system = LtvSystem.from_matrices(A=[[-1.0]], B=[[0.0]], C_E=[[1.0]], horizon=1.0)
        with pytest.raises(UnreachableOutputError):
            wc_disturbance_l2e(system, solve_lde(system), 1.0)

    def test_zero_after_tau(self):
        system = scalar_lag(horizon=2.0)
        trace = solve_lde(system)
        d = wc_disturbance_l2e(system, trace, 1.0)
        k = trace.index_of(1.0)
        assert np.any(d.samples[:k] != 0.0)
        assert np.all(d.samples[k + 1:] == 0.0)
        assert d.spans(2.0)


class TestAgreementWithInducedGain:
    """Test suite comparing the Gramian gain with the combined bounds"""

    def test_random_systems(self, rng, coarse_settings):
        """Test sqrt(lambda_1(Y(T))) lies inside the combined bracket"""
        tol = 1e-3
        for _ in range(10):
            system = random_ltv(rng, n_x=int(rng.integers(1, 4)), n_d=int(rng.integers(1, 3)), n_I=0, n_E=int(rng.integers(1, 3)))
            gain, _ = l2e_gain(solve_lde(system, coarse_settings), system.horizon)
            bounds = combined_gain(system, tol, settings=coarse_settings)
            assert bounds.converged
            assert bounds.gamma_lb - 1e-4 <= gain <= bounds.gamma_ub + 1e-4

    def test_interior_horizons(self, rng, coarse_settings):
        """Test gains at interior tau match the combined bounds of the truncated system"""
        system = random_ltv(rng, n_x=2, n_d=1, n_I=0, n_E=1)
        trace = solve_lde(system, coarse_settings)
        for tau in (0.25, 0.5, 0.75):
            tau_k = float(trace.times[trace.index_of(tau)])
            gain, _ = l2e_gain(trace, tau_k)
            bounds = combined_gain(system.truncate(tau_k), 1e-3, settings=coarse_settings)
            assert bounds.gamma_lb - 2e-3 <= gain <= bounds.gamma_ub + 2e-3
