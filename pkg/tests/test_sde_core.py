import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from backfill.errors import DecompositionError, InvalidInputError
from backfill.sde_core import (LinearModelSpec, MatrixFunction, PathSample, gaussian_log_density,
                               gaussian_score, make_uniform_grid, simulate_linear_signal,
                               simulate_linear_signal_ensemble, simulate_observation)


def scalar_model(a=0.0, c=0.0, h=1.0, k=1.0):
    return LinearModelSpec(A=[[a]], C=[[c]], H=[[h]], K=[[k]])


class TestTimeGrid:
    def test_four_steps(self):
        g = make_uniform_grid(0, 1, 4)
        np.testing.assert_allclose(g.times, [0, 0.25, 0.5, 0.75, 1.0])
        assert g.dt == 0.25

    def test_minimal_grid(self):
        np.testing.assert_array_equal(make_uniform_grid(0, 1, 1).times, [0.0, 1.0])

    @pytest.mark.parametrize("args", [(1, 0, 4), (0, 0, 3), (0, 1, 0)])
    def test_rejects_bad_grids(self, args):
        with pytest.raises(InvalidInputError):
            make_uniform_grid(*args)

    def test_index_lookup(self):
        g = make_uniform_grid(0, 1, 1000)
        assert g.index_of(0.4) == 400
        assert g.index_floor(0.4005) == 400
        assert g.index_floor(1.0) == 1000
        with pytest.raises(InvalidInputError):
            g.index_of(0.4005)

    @given(st.floats(-5, 5), st.floats(0.01, 10), st.integers(1, 5000))
    def test_uniform_and_exact_endpoints(self, t0, span, n):
        g = make_uniform_grid(t0, t0 + span, n)
        t = g.times
        assert len(t) == n + 1
        assert t[0] == t0 and t[-1] == t0 + span
        assert np.all(np.diff(t) > 0)
        np.testing.assert_allclose(np.diff(t), g.dt, rtol=1e-9, atol=1e-12)

    def test_subgrid_shares_points(self):
        g = make_uniform_grid(0, 2, 20)
        s = g.subgrid(5, 15)
        np.testing.assert_allclose(s.times, g.times[5:16])


class TestMatrixFunction:
    def test_constant(self):
        f = MatrixFunction([[1.0, 2.0]])
        assert f.shape == (1, 2)
        np.testing.assert_array_equal(f(0.3), [[1.0, 2.0]])

    def test_left_sample_between_grid_points(self):
        g = make_uniform_grid(0, 1, 4)
        f = MatrixFunction(np.arange(5.0), g)
        assert f(0.49)[0, 0] == 1.0
        assert f(0.5)[0, 0] == 2.0
        np.testing.assert_array_equal(f.on_grid(g)[:, 0, 0], np.arange(5.0))

    def test_wrong_sample_count(self):
        with pytest.raises(InvalidInputError):
            MatrixFunction(np.zeros(3), make_uniform_grid(0, 1, 4))


class TestLinearModelSpec:
    def test_dimensions(self):
        m = LinearModelSpec(A=np.zeros((3, 3)), C=np.zeros((3, 2)), H=np.zeros((4, 3)),
                            K=np.eye(4), D=np.zeros((3, 5)))
        assert (m.n, m.m, m.k, m.p) == (3, 2, 5, 4)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            LinearModelSpec(A=np.zeros((2, 2)), C=np.zeros((3, 1)), H=np.zeros((1, 2)), K=[[1.0]])

    def test_singular_K_rejected(self):
        m = LinearModelSpec(A=np.zeros((2, 2)), C=np.eye(2), H=np.eye(2), K=[[1.0, 0], [0, 1e-14]])
        with pytest.raises(InvalidInputError, match="ill-conditioned"):
            m.validate(make_uniform_grid(0, 1, 10))


class TestSimulateSignal:
    def test_no_dynamics_constant_path(self):
        g = make_uniform_grid(0, 1, 100)
        x = simulate_linear_signal(scalar_model(), [2.5], g, 3)
        np.testing.assert_array_equal(x.values, 2.5)

    def test_deterministic_growth_matches_exponential(self):
        g = make_uniform_grid(0, 1, 1000)
        x = simulate_linear_signal(scalar_model(a=0.7), [1.3], g, 0)
        exact = 1.3 * np.exp(0.7 * g.times)
        assert np.max(np.abs(x.values[:, 0] - exact)) <= 2 * g.dt * np.max(exact)

    def test_brownian_variance(self):
        g = make_uniform_grid(0, 1, 20)
        paths = simulate_linear_signal_ensemble(scalar_model(c=1.0), [0.0], g, 11, 10_000)
        for k in (5, 10, 20):
            v = paths[:, k, 0].var(ddof=1)
            se = g.times[k] * np.sqrt(2 / 9999)
            assert abs(v - g.times[k]) <= 3 * se

    def test_ou_weak_convergence(self):
        g = make_uniform_grid(0, 1, 1000)
        x0 = 1.5
        paths = simulate_linear_signal_ensemble(scalar_model(a=-1.0, c=1.0), [x0], g, 5, 10_000)
        xT = paths[:, -1, 0]
        m, v = np.exp(-1) * x0, (1 - np.exp(-2)) / 2
        assert abs(xT.mean() - m) <= 3 * np.sqrt(v / xT.size)
        assert abs(xT.var(ddof=1) - v) <= 3 * v * np.sqrt(2 / (xT.size - 1))

    def test_bit_identical_for_same_seed(self):
        g = make_uniform_grid(0, 1, 200)
        m = scalar_model(a=-0.5, c=0.3)
        a = simulate_linear_signal(m, [0.1], g, 42)
        b = simulate_linear_signal(m, [0.1], g, 42)
        assert a.values.tobytes() == b.values.tobytes()
        assert a.values.tobytes() != simulate_linear_signal(m, [0.1], g, 43).values.tobytes()

    def test_path_noise_independent_of_ensemble_size(self):
        g = make_uniform_grid(0, 1, 50)
        m = scalar_model(c=1.0)
        big = simulate_linear_signal_ensemble(m, [0.0], g, 9, 8)
        tail = simulate_linear_signal_ensemble(m, [0.0], g, 9, 3, first_path=5)
        np.testing.assert_array_equal(big[5:], tail)

    def test_control_enters_drift(self):
        g = make_uniform_grid(0, 1, 1000)
        m = LinearModelSpec(A=[[0.0]], C=[[0.0]], H=[[1.0]], K=[[1.0]], D=[[2.0]],
                            control=lambda t: [1.0])
        x = simulate_linear_signal(m, [0.0], g, 0)
        np.testing.assert_allclose(x.values[:, 0], 2 * g.times, atol=1e-12)


class TestSimulateObservation:
    def test_zero_observation(self):
        g = make_uniform_grid(0, 1, 100)
        m = scalar_model(h=0.0, k=0.0)
        x = simulate_linear_signal(scalar_model(c=1.0), [0.0], g, 1)
        y = simulate_observation(m, x, 2)
        np.testing.assert_array_equal(y.values, 0.0)

    def test_pure_drift_integration(self):
        g = make_uniform_grid(0, 2, 100)
        x = PathSample(g, np.full(101, 3.0))
        y = simulate_observation(scalar_model(h=1.0, k=0.0), x, 0)
        np.testing.assert_allclose(y.values[:, 0], 3.0 * g.times, atol=1e-12)

    def test_quadratic_variation(self):
        g = make_uniform_grid(0, 1, 1000)
        x = PathSample(g, np.zeros(1001))
        y = simulate_observation(scalar_model(h=0.0, k=1.0), x, 4)
        qv = np.sum(np.diff(y.values[:, 0]) ** 2)
        assert abs(qv - 1.0) <= 0.1
        assert y.values[0, 0] == 0.0

    def test_grid_mismatch(self):
        x = PathSample(make_uniform_grid(0, 1, 10), np.zeros(11))
        with pytest.raises(InvalidInputError):
            simulate_observation(scalar_model(), x, 0, grid=make_uniform_grid(0, 1, 20))


class TestGaussianDensity:
    def test_score_zero_at_mean(self):
        m = np.array([1.0, -2.0])
        S = np.array([[2.0, 0.3], [0.3, 1.0]])
        np.testing.assert_allclose(gaussian_score(m, S, m), 0.0, atol=1e-15)

    def test_standard_normal_score(self):
        x = np.array([0.3, -1.2, 2.0])
        np.testing.assert_allclose(gaussian_score(np.zeros(3), np.eye(3), x), -x)

    def test_log_density_hand_value(self):
        assert gaussian_log_density([0.0], [[4.0]], [2.0]) == pytest.approx(-0.5 * np.log(8 * np.pi) - 0.5,
                                                                           rel=1e-14)

    def test_non_spd_rejected(self):
        with pytest.raises(DecompositionError):
            gaussian_log_density([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]], [0.0, 0.0])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(1, 4))
    def test_score_is_gradient_of_log_density(self, seed, n):
        rng = np.random.default_rng(seed)
        B = rng.normal(size=(n, n))
        S = B @ B.T + 0.5 * np.eye(n)
        m, x = rng.normal(size=n), rng.normal(size=n)
        h = 1e-5
        fd = np.array([(gaussian_log_density(m, S, x + h * e) - gaussian_log_density(m, S, x - h * e)) / (2 * h)
                       for e in np.eye(n)])
        sc = gaussian_score(m, S, x)
        assert np.linalg.norm(fd - sc) <= 1e-6 * max(1.0, np.linalg.norm(sc))


class TestPathSample:
    def test_values_are_read_only_copies(self):
        g = make_uniform_grid(0, 1, 2)
        raw = np.zeros(3)
        p = PathSample(g, raw)
        raw[0] = 5.0
        assert p.values[0, 0] == 0.0
        with pytest.raises(ValueError):
            p.values[0, 0] = 1.0

    def test_wrong_length(self):
        with pytest.raises(InvalidInputError):
            PathSample(make_uniform_grid(0, 1, 2), np.zeros(4))
