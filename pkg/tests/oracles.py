"""Independent reference computations used by the tests.

Nothing here calls into the package except for plain data containers.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from backfill.sde_core import LinearModelSpec


def random_stable_model(rng: np.random.Generator) -> LinearModelSpec:
    """2-D model with stable A, a sinusoidal control and well-conditioned K."""
    while True:
        A = rng.normal(0, 0.5, (2, 2)) - 0.5 * np.eye(2)
        if np.max(np.linalg.eigvals(A).real) < -0.1:
            break
    C = rng.normal(0, 0.5, (2, 2))
    H = rng.normal(0, 1, (2, 2))
    K = np.diag(rng.uniform(0.8, 1.2, 2)) + rng.normal(0, 0.05, (2, 2))
    D = rng.normal(0, 1, (2, 1))
    return LinearModelSpec(A=A, C=C, H=H, K=K, D=D, control=lambda t: [np.sin(3 * t)])


def discrete_kalman(model: LinearModelSpec, Y: np.ndarray, mean0, cov0, grid):
    """Discrete-time Kalman filter on the same grid, symmetrically split.

    Each step predicts over half a step with the exact OU transition (Van
    Loan's matrix exponential for the noise covariance), updates with the
    observation increment ``dY_j ~ N(H dt x, K K' dt)`` and predicts over the
    remaining half.  The symmetric split keeps the splitting error second
    order in ``dt``; a plain update-then-predict step carries a first-order
    error of about 1e-3 at ``dt = 1e-3``, which is as large as the tolerance
    the filter is held to.
    """
    A_all = model.A.on_grid(grid)
    C_all = model.C.on_grid(grid)
    H_all = model.H.on_grid(grid)
    K_all = model.K.on_grid(grid)
    D_all = model.D.on_grid(grid)
    u_all = model.control_on_grid(grid)
    n, dt = model.n, grid.dt

    def predict(x, P, j, h):
        A, Qc = A_all[j], C_all[j] @ C_all[j].T
        E = expm(np.block([[-A, Qc], [np.zeros((n, n)), A.T]]) * h)
        F = E[n:, n:].T
        Q = F @ E[:n, n:]
        return F @ x + D_all[j] @ u_all[j] * h, F @ P @ F.T + Q

    x = np.asarray(mean0, dtype=float).copy()
    P = np.asarray(cov0, dtype=float).copy()
    dY = np.diff(Y, axis=0)
    xs, Ps = [x], [P]
    for j in range(grid.n_steps):
        x, P = predict(x, P, j, dt / 2)
        H = H_all[j] * dt
        R = K_all[j] @ K_all[j].T * dt
        S = H @ P @ H.T + R
        G = P @ H.T @ np.linalg.inv(S)
        x = x + G @ (dY[j] - H @ x)
        P = P - G @ H @ P
        x, P = predict(x, P, j, dt / 2)
        xs.append(x)
        Ps.append(P)
    return np.array(xs), np.array(Ps)


def relative_error(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(b))


def euler_bridge_kl(y: float, z: float, sigma: float, n_steps: int, dt: float) -> float:
    """Exact expected KL of the Euler Brownian bridge with ``n_steps`` strides.

    With ``e = x - z`` and ``m`` strides left, the bridge step is
    ``e <- e (1 - 1/m) + sigma sqrt(dt) xi`` and contributes
    ``E[e^2] / (2 sigma^2 m^2 dt)`` to the relative entropy.
    """
    mean, var = y - z, 0.0
    total = 0.0
    for m in range(n_steps, 0, -1):
        total += 0.5 * (mean ** 2 + var) / (sigma ** 2 * m ** 2 * dt)
        f = 1.0 - 1.0 / m
        mean, var = mean * f, var * f * f + sigma ** 2 * dt
    return total


def ou_bridge_mean(t, knot_times, knot_values, rate: float) -> np.ndarray:
    """Posterior mean of a stationary zero-mean OU (``dX = -rate X dt + c dW``) given exact knots."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    for i, s in enumerate(t):
        j = np.searchsorted(knot_times, s, side="right")
        if j == 0:
            out[i] = knot_values[0] * np.exp(-rate * (knot_times[0] - s))
        elif j == len(knot_times):
            out[i] = knot_values[-1] * np.exp(-rate * (s - knot_times[-1]))
        else:
            t0, t1 = knot_times[j - 1], knot_times[j]
            u, v = knot_values[j - 1], knot_values[j]
            out[i] = (u * np.sinh(rate * (t1 - s)) + v * np.sinh(rate * (s - t0))) / np.sinh(rate * (t1 - t0))
    return out


def simulate_filter_mean(a: float, gain: np.ndarray, x0: np.ndarray, dt: float,
                         rng: np.random.Generator) -> np.ndarray:
    """Forward Euler paths of the scalar filter-mean SDE ``dm = a m dt + g_t dB``.

    ``gain`` holds ``g_t`` on the grid and ``x0`` the starting values, one per
    path.  Returns an array of shape ``(len(x0), len(gain))``.
    """
    x = np.asarray(x0, dtype=float).copy()
    out = np.empty((x.size, len(gain)))
    out[:, 0] = x
    for j in range(len(gain) - 1):
        x = x + a * x * dt + gain[j] * np.sqrt(dt) * rng.standard_normal(x.size)
        out[:, j + 1] = x
    return out
