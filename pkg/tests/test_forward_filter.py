import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from backfill.errors import DegenerateRegressionError, InvalidInputError
from backfill.forward_filter import (GaussianState, OUTemplate, calibrate_linear_model,
                                     integrate_riccati, run_kalman_bucy)
from backfill.sde_core import (LinearModelSpec, PathSample, make_uniform_grid, simulate_linear_signal,
                               simulate_linear_signal_ensemble, simulate_observation)

from oracles import discrete_kalman, random_stable_model, relative_error


def scalar(a=0.0, c=1.0, h=1.0, k=1.0):
    return LinearModelSpec(A=[[a]], C=[[c]], H=[[h]], K=[[k]])


class TestRiccati:
    def test_tanh_closed_form(self):
        g = make_uniform_grid(0, 1, 1000)
        P = integrate_riccati(scalar(), [[0.0]], g)
        np.testing.assert_allclose(P[:, 0, 0], np.tanh(g.times), atol=1e-9)
        assert abs(P[-1, 0, 0] - 0.761594) < 1e-6

    def test_frozen_covariance(self):
        g = make_uniform_grid(0, 1, 100)
        P0 = np.array([[2.0, 0.5], [0.5, 1.0]])
        m = LinearModelSpec(A=np.zeros((2, 2)), C=np.zeros((2, 2)), H=np.zeros((1, 2)), K=[[1.0]])
        P = integrate_riccati(m, P0, g)
        np.testing.assert_allclose(P, np.broadcast_to(P0, P.shape), atol=1e-15)

    def test_lyapunov_decay(self):
        g = make_uniform_grid(0, 1, 1000)
        P = integrate_riccati(scalar(a=-1.0, c=0.0, h=0.0), [[1.0]], g)
        np.testing.assert_allclose(P[:, 0, 0], np.exp(-2 * g.times), rtol=1e-10)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_symmetric_psd_on_random_models(self, seed):
        rng = np.random.default_rng(seed)
        m = random_stable_model(rng)
        B = rng.normal(size=(2, 2))
        P = integrate_riccati(m, B @ B.T, make_uniform_grid(0, 1, 200))
        assert np.max(np.abs(P - P.transpose(0, 2, 1))) <= 1e-10
        assert np.min(np.linalg.eigvalsh(P)) >= -1e-10

    def test_stiff_channel_is_substepped(self):
        # gain P/K^2 dt = 4: a single RK4 step would overshoot below zero
        g = make_uniform_grid(0, 0.05, 50)
        P = integrate_riccati(scalar(c=0.0, k=0.005), [[1e-1]], g)
        exact = 1.0 / (1.0 / 0.1 + g.times / 0.005 ** 2)
        np.testing.assert_allclose(P[:, 0, 0], exact, rtol=1e-3)


class TestKalmanBucy:
    def test_uninformative_observations(self):
        g = make_uniform_grid(0, 1, 100)
        m = scalar(c=1.0, h=0.0)
        y = PathSample(g, np.cumsum(np.random.default_rng(0).normal(size=101)))
        tr, _ = run_kalman_bucy(m, y, GaussianState([0.7], [[1.0]]))
        np.testing.assert_array_equal(tr.means[:, 0], 0.7)

    def test_converges_to_constant_signal(self):
        g = make_uniform_grid(0, 1, 1000)
        m = scalar(a=0.0, c=0.0, h=1.0, k=0.1)
        inside = 0
        for seed in range(200):
            x = PathSample(g, np.full(1001, 1.3))
            y = simulate_observation(m, x, seed)
            tr, _ = run_kalman_bucy(m, y, GaussianState([0.0], [[4.0]]))
            inside += abs(tr.means[-1, 0] - 1.3) <= 3 * np.sqrt(tr.covs[-1, 0, 0])
        assert inside >= 190

    def test_matches_discrete_oracle(self):
        g = make_uniform_grid(0, 1, 1000)
        rng = np.random.default_rng(123)
        for i in range(5):
            m = random_stable_model(rng)
            x = simulate_linear_signal(m, [1.0, -1.0], g, i)
            y = simulate_observation(m, x, i)
            init = GaussianState([1.0, -1.0], 0.5 * np.eye(2))
            tr, _ = run_kalman_bucy(m, y, init)
            xo, Po = discrete_kalman(m, y.values, init.mean, init.cov, g)
            assert relative_error(tr.means, xo) <= 1e-3
            assert relative_error(tr.covs, Po) <= 1e-3

    def test_innovations_white(self):
        g = make_uniform_grid(0, 10, 10_000)
        m = scalar(a=-1.0, c=1.0, h=1.0, k=0.5)
        x = simulate_linear_signal(m, [0.0], g, 3)
        y = simulate_observation(m, x, 3)
        _, innov = run_kalman_bucy(m, y, GaussianState([0.0], [[0.5]]))
        z = innov.normalized()[:, 0]
        assert abs(z.mean()) <= 3 / np.sqrt(z.size)
        assert abs(z.var() - 1) <= 0.1
        assert innov.path.values.shape == (10_001, 1)

    def test_grid_refinement_order(self):
        # rms change of the terminal mean over seeds when dt halves
        m = scalar(a=-1.0, c=1.0, h=1.0, k=0.5)
        fine = make_uniform_grid(0, 1, 4000)
        diffs = []
        for seed in range(40):
            x = simulate_linear_signal(m, [0.5], fine, seed)
            y = simulate_observation(m, x, seed)
            ends = []
            for stride in (32, 16, 8, 4):
                g = make_uniform_grid(0, 1, 4000 // stride)
                tr, _ = run_kalman_bucy(m, PathSample(g, y.values[::stride]), GaussianState([0.0], [[1.0]]))
                ends.append(tr.means[-1, 0])
            diffs.append(np.diff(ends))
        rms = np.sqrt(np.mean(np.square(diffs), axis=0))
        ratios = rms[:-1] / rms[1:]
        assert np.all((ratios >= 1.5) & (ratios <= 3)), ratios

    def test_euler_mean_scheme_available(self):
        g = make_uniform_grid(0, 1, 1000)
        rng = np.random.default_rng(5)
        m = random_stable_model(rng)
        x = simulate_linear_signal(m, [1.0, -1.0], g, 0)
        y = simulate_observation(m, x, 0)
        init = GaussianState([1.0, -1.0], 0.5 * np.eye(2))
        heun, _ = run_kalman_bucy(m, y, init)
        euler, _ = run_kalman_bucy(m, y, init, mean_scheme="euler")
        np.testing.assert_array_equal(heun.covs, euler.covs)
        assert relative_error(euler.means, heun.means) < 5e-3
        with pytest.raises(InvalidInputError):
            run_kalman_bucy(m, y, init, mean_scheme="rk4")

    def test_dimension_checks(self):
        g = make_uniform_grid(0, 1, 10)
        with pytest.raises(InvalidInputError):
            run_kalman_bucy(scalar(), PathSample(g, np.zeros((11, 2))), GaussianState([0.0], [[1.0]]))
        with pytest.raises(InvalidInputError):
            run_kalman_bucy(scalar(), PathSample(g, np.zeros(11)), GaussianState([0.0, 0.0], np.eye(2)))


class TestGaussianState:
    def test_clips_tiny_negative_eigenvalues(self):
        s = GaussianState([0.0, 0.0], [[1.0, 1.0], [1.0, 1.0 - 1e-12]])
        assert np.min(np.linalg.eigvalsh(s.cov)) >= 0

    def test_rejects_asymmetric(self):
        with pytest.raises(InvalidInputError):
            GaussianState([0.0, 0.0], [[1.0, 0.5], [0.0, 1.0]])


class TestCalibration:
    @staticmethod
    def estimates(a, seeds):
        g = make_uniform_grid(0, 1000, 100_000)
        m = scalar(a=a, c=1.0)
        x = simulate_linear_signal_ensemble(m, [0.0], g, 77, len(seeds), first_path=seeds[0])
        return [calibrate_linear_model(PathSample(g, p), OUTemplate(kappa=0.1)) for p in x]

    def test_mean_reverting(self):
        fits = self.estimates(-1.0, list(range(20)))
        a_hat = np.array([f.a for f in fits])
        assert np.mean(np.abs(a_hat + 1.0) <= 0.15) >= 0.9
        assert np.all(np.abs([f.c - 1.0 for f in fits]) < 0.02)
        assert all(f.a_se > 0 and f.c_se > 0 for f in fits)

    def test_random_walk(self):
        fits = self.estimates(0.0, list(range(20)))
        assert np.mean(np.abs([f.a for f in fits]) <= 0.1) >= 0.9

    def test_constant_input(self):
        g = make_uniform_grid(0, 1, 200)
        with pytest.raises(DegenerateRegressionError):
            calibrate_linear_model(PathSample(g, np.full(201, 2.0)), OUTemplate(kappa=0.1))

    def test_too_short(self):
        g = make_uniform_grid(0, 1, 50)
        with pytest.raises(InvalidInputError):
            calibrate_linear_model(PathSample(g, np.arange(51.0)), OUTemplate(kappa=0.1))

    def test_model_property(self):
        g = make_uniform_grid(0, 10, 1000)
        x = simulate_linear_signal(scalar(a=-2.0, c=0.5), [0.0], g, 0)
        fit = calibrate_linear_model(x, OUTemplate(kappa=0.3))
        m = fit.model
        assert m.A(0)[0, 0] == fit.a and m.K(0)[0, 0] == 0.3
