import math

import numpy as np
import pytest

from src.exceptions import InvalidSystemError, OutOfDomainError
from src.ltv_model import LtvSystem, TvMatrixFn, adjoint, block_diag, validate

from tests.example_systems import g1, imae, random_ltv, scalar_lag


class TestTvMatrixFn:
    """Test suite for constant and gridded matrix sources"""

    def test_constant(self):
        source = TvMatrixFn.constant([[1.0, 2.0]])
        np.testing.assert_array_equal(source(0.7), [[1.0, 2.0]])
        assert source.is_constant
        assert source.shape == (1, 2)

    def test_gridded_midpoint(self):
        """Test linear interpolation between two knots"""
        source = TvMatrixFn.gridded([0.0, 1.0], [[[0.0]], [[2.0]]])
        assert source(0.5)[0, 0] == pytest.approx(1.0)

    def test_grid_points_exact(self):
        """Test evaluation at a knot returns the stored sample"""
        times = np.linspace(0.0, 1.0, 11)
        source = TvMatrixFn.from_function(times, lambda t: [[math.sin(7 * t)]])
        for t, sample in zip(times, source.samples):
            np.testing.assert_array_equal(source(t), sample)

    def test_out_of_domain(self):
        source = TvMatrixFn.gridded([0.0, 1.0], [[[0.0]], [[2.0]]])
        with pytest.raises(OutOfDomainError):
            source(1.5)

    def test_lipschitz_between_knots(self, rng):
        """Test |A(t) - A(s)| <= L |t - s| for the piecewise-linear source"""
        times = np.linspace(0.0, 1.0, 6)
        samples = [rng.standard_normal((2, 2)) for _ in times]
        source = TvMatrixFn.gridded(times, samples)
        slopes = [np.max(np.abs(b - a)) / 0.2 for a, b in zip(samples, samples[1:])]
        for t, s in rng.uniform(0.0, 1.0, size=(20, 2)):
            assert np.max(np.abs(source(t) - source(s))) <= max(slopes) * abs(t - s) + 1e-12

    def test_issues(self):
        """Test non-increasing times are reported with their path"""
        source = TvMatrixFn.gridded([0.0, 0.0, 1.0], [[[1.0]]] * 3)
        assert "matrices.A: times not strictly increasing" in source.issues("matrices.A")


class TestLtvSystem:
    """Test suite for system construction and validation"""

    def test_eval_constant(self):
        A, B, C_I, D_I, C_E = g1().eval(3.0)
        np.testing.assert_array_equal(A, [[-0.1, 0.4], [-0.5, 0.0]])
        assert C_E.shape == (0, 2)
        assert D_I.shape == (1, 1)

    def test_eval_time_varying(self):
        """Test the Imae A(t) entry -1 + sin(t) at pi / 2"""
        A = imae().eval(math.pi / 2)[0]
        np.testing.assert_allclose(A, [[0.0, 1.0], [0.0, -4.0]], atol=1e-4)

    def test_eval_outside_horizon(self):
        with pytest.raises(OutOfDomainError):
            g1().eval(10.5)

    def test_valid_system(self):
        assert validate(g1()) == []

    def test_shape_mismatch_reported(self):
        """Test a B with the wrong row count names matrices.B"""
        with pytest.raises(InvalidSystemError) as excinfo:
            LtvSystem.from_matrices(A=np.zeros((2, 2)), B=np.ones((3, 1)), C_I=np.ones((1, 2)), horizon=1.0)
        assert any("matrices.B" in v or "matrices.A" in v for v in excinfo.value.violations)

    def test_no_outputs_rejected(self):
        """Test n_I + n_E >= 1 is enforced"""
        with pytest.raises(InvalidSystemError) as excinfo:
            LtvSystem.from_matrices(A=[[0.0]], B=[[1.0]], horizon=1.0)
        assert any("n_I + n_E" in v for v in excinfo.value.violations)

    def test_bad_horizon(self):
        with pytest.raises(InvalidSystemError):
            LtvSystem.from_matrices(A=[[0.0]], B=[[1.0]], C_E=[[1.0]], horizon=0.0)

    def test_grid_must_cover_horizon(self):
        """Test a gridded source ending before T is rejected"""
        A = TvMatrixFn.gridded([0.0, 0.5], [[[0.0]], [[0.0]]])
        with pytest.raises(InvalidSystemError) as excinfo:
            LtvSystem.from_matrices(A=A, B=[[1.0]], C_E=[[1.0]], horizon=1.0)
        assert any("does not cover" in v for v in excinfo.value.violations)

    def test_non_increasing_times_reported(self):
        A = TvMatrixFn.gridded([0.0, 0.0, 1.0], [[[0.0]]] * 3)
        with pytest.raises(InvalidSystemError) as excinfo:
            LtvSystem.from_matrices(A=A, B=[[1.0]], C_E=[[1.0]], horizon=1.0)
        assert "matrices.A: times not strictly increasing" in excinfo.value.violations

    def test_truncate(self):
        short = g1().truncate(4.0)
        assert short.horizon == 4.0
        assert short.n_x == 2
        with pytest.raises(OutOfDomainError):
            g1().truncate(11.0)

    def test_analysis_grid(self):
        """Test the grid is refined for fast dynamics"""
        assert len(g1().analysis_grid(2000)) == 2001
        fast = LtvSystem.from_matrices(A=[[-80.0]], B=[[1.0]], C_E=[[1.0]], horizon=1.0)
        grid = fast.analysis_grid(2000, 40.0)
        assert len(grid) == 3201
        assert grid[-1] == 1.0

    def test_block_diag(self):
        """Test diag(G1, 0.95 G1) stacks states and scales outputs"""
        pair = block_diag(g1(), g1(), scales=[1.0, 0.95])
        assert (pair.n_x, pair.n_d, pair.n_I) == (4, 2, 2)
        np.testing.assert_allclose(pair.C_I(0.0)[1], [0.0, 0.0, 0.0, 0.95])

    def test_sampled_on_grid(self):
        system = imae()
        grid = system.analysis_grid(200)
        A, B, C_I, D_I, C_E = system.sampled(grid).on_grid()
        assert A.shape == (len(grid), 2, 2)
        np.testing.assert_allclose(A[:, 0, 0], -1.0 + np.sin(grid), atol=1e-4)


class TestAdjoint:
    """Test suite for the adjoint system"""

    def test_scalar(self):
        """Test A = -1, B = 2 gives state 1 and output 2"""
        system = LtvSystem.from_matrices(A=[[-1.0]], B=[[2.0]], C_E=[[1.0]], horizon=1.0)
        state, _, output, _ = adjoint(system).eval(0.5)
        np.testing.assert_array_equal(state, [[1.0]])
        np.testing.assert_array_equal(output, [[2.0]])

    def test_g1(self):
        state = adjoint(g1()).eval(0.0)[0]
        np.testing.assert_array_equal(state, [[0.1, 0.5], [-0.4, 0.0]])

    def test_dimensions(self, rng):
        """Test the adjoint output has n_d rows"""
        system = random_ltv(rng, n_x=3, n_d=2, n_I=1, n_E=2)
        adj = adjoint(system)
        state, inp, output, feed = adj.eval(0.3)
        assert output.shape == (2, 3)
        assert inp.shape == (3, 1)
        assert feed.shape == (2, 1)
        assert adj.terminal_map.shape == (3, 2)

    def test_terminal_map(self):
        np.testing.assert_array_equal(adjoint(scalar_lag()).terminal_map, [[1.0]])
