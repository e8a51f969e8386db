"""
Bridges through realized ticks
==============================

A backward path must pass through the sparse ticks recorded before the
liquidity time.  The h-transform adds a pull toward the next anchor; the
stride that lands on an anchor is pinned, so every hit is exact.  Among all
drifts that hit the anchors the bridge has the smallest relative entropy to
the unconditioned sampler.
"""

import numpy as np

from backfill import (AnchorSet, BridgeSpec, PathSample, ReversedModel, interpolation_relaxation,
                      make_uniform_grid, simulate_conditioned_backfill)
from backfill.conditioning import _bridge_extra

grid = make_uniform_grid(0.0, 1.0, 1000)
N = grid.n_steps
sigma = 0.8
brownian = ReversedModel(grid, np.zeros((N + 1, 1, 1)), np.zeros((N + 1, 1)), np.full((N + 1, 1, 1), sigma))

# A single anchor at t = 0.4; the walk starts at 1.0 at t = 1 and runs back.
spec = BridgeSpec(brownian, AnchorSet([0.4], [-0.5]))
ens = simulate_conditioned_backfill(spec, [1.0], 10_000, seed=0)
print(f"max anchor miss: {ens.max_hit_error:.1e}")
print("   t    mean   bridge mean    var   bridge var")
for t in (0.5, 0.7, 0.9):
    xs = ens.paths[:, grid.index_of(t), 0]
    mean = -0.5 + 1.5 * (t - 0.4) / 0.6
    var = sigma ** 2 * (1 - t) * (t - 0.4) / 0.6
    print(f"{t:4.1f}  {xs.mean():+.4f}    {mean:+.4f}    {xs.var():.4f}    {var:.4f}")

# Relative entropy of the bridge against other ways of reaching the anchor.
def steeper(k, x):
    return 2.0 * _bridge_extra(spec, k, x)


def straight_line(k, x):
    return np.full_like(x, -1.5 / 0.6)


for name, guide in (("bridge", None), ("twice as steep", steeper), ("straight line", straight_line)):
    kl = simulate_conditioned_backfill(spec, [1.0], 2000, seed=1, guide=guide).mean_kl
    print(f"KL {name:>15s}: {kl:.3f}")

# The relaxed alternative: add a piecewise-linear correction to any path.
b = PathSample(grid, np.sin(6 * grid.times))
anchors = AnchorSet([0.2, 0.5, 0.8], [0.0, 1.0, -1.0])
h = interpolation_relaxation(b, anchors, left="hold", right=1.0)
print("\nrelaxed path at the anchors:", np.round(h.values[[200, 500, 800], 0], 12))
