"""
Filtering a noisy Ornstein-Uhlenbeck signal
===========================================

A latent OU process is observed through ``dY = X dt + kappa dB``.  The
Kalman-Bucy filter turns the observation path into a Gaussian law
N(mean_t, P_t) for the signal at every time.
"""

import numpy as np

from backfill import (GaussianState, LinearModelSpec, integrate_riccati, make_uniform_grid,
                      run_kalman_bucy, simulate_linear_signal, simulate_observation)

# The covariance does not depend on the data.  For A=0, C=H=K=1 and P(0)=0 the
# Riccati equation dP/dt = 1 - P^2 is solved by tanh.
grid = make_uniform_grid(0.0, 1.0, 1000)
brownian = LinearModelSpec(A=[[0.0]], C=[[1.0]], H=[[1.0]], K=[[1.0]])
P = integrate_riccati(brownian, [[0.0]], grid)
print(f"P(1) = {P[-1, 0, 0]:.8f}   tanh(1) = {np.tanh(1.0):.8f}")

# Now a mean-reverting signal with moderately noisy observations.
ou = LinearModelSpec(A=[[-2.0]], C=[[1.0]], H=[[1.0]], K=[[0.3]])
grid = make_uniform_grid(0.0, 5.0, 5000)
x = simulate_linear_signal(ou, [0.5], grid, noise_seed=1)
y = simulate_observation(ou, x, noise_seed=1)
traj, innovations = run_kalman_bucy(ou, y, GaussianState([0.0], [[0.25]]))

err = traj.means[:, 0] - x.values[:, 0]
sd = np.sqrt(traj.covs[:, 0, 0])
print(f"steady-state filter sd      {sd[-1]:.4f}")
print(f"rms filter error            {np.sqrt(np.mean(err[1000:] ** 2)):.4f}")
print(f"fraction inside +-2 sd      {np.mean(np.abs(err) <= 2 * sd):.3f}")

# If the model is right the innovations are white noise with unit variance.
z = innovations.normalized()[:, 0]
print(f"innovations: mean {z.mean():+.4f}, variance {z.var():.4f}")

# A short table of the filter against the truth.
print("\n   t     truth    mean      sd")
for t in (0.5, 1.5, 2.5, 3.5, 4.5):
    k = grid.index_of(t)
    print(f"{t:4.1f}  {x.values[k, 0]:+.4f}  {traj.means[k, 0]:+.4f}  {sd[k]:.4f}")
