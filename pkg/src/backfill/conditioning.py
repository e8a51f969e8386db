"""Conditioning backfilled paths on realized ticks.

For a linear reversed model the transition from grid index ``j`` to an
anchor index ``j_a < j`` is Gaussian, ``N(Phi_j x + mu_j, Q_j)``, where the
maps are accumulated from the same Euler chain that is simulated:

    x_{j-1} = M_j x_j + f_j ds + G_j dW,    M_j = I + F_j ds.

The Doob h-transform adds ``a_j Phi_j' Q_j^{-1} (z - Phi_j x - mu_j)`` to the
reversed drift, where ``a = G G'`` and ``z`` is the next anchor in the
reversed clock.  The stride that lands on an anchor is pinned exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _rng
from .errors import InvalidInputError, StepSizeError, UnreachableAnchorError
from .forward_filter import GaussianState
from .sde_core import PathSample, TimeGrid
from .time_reversal import Ensemble, ReversedModel, _start_array

EPS_HIT = 1e-8
GRAMIAN_COND_MAX = 1e12

Guide = Callable[[int, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class AnchorSet:
    """Realized values the backfill must pass through, in calendar order."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        v = np.asarray(self.values, dtype=float).reshape(t.size, -1) if t.size else np.empty((0, 1))
        if t.size and np.any(np.diff(t) <= 0):
            raise InvalidInputError("anchor times must be strictly increasing")
        if not np.all(np.isfinite(v)) or not np.all(np.isfinite(t)):
            raise InvalidInputError("anchor times and values must be finite")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.times.size

    @classmethod
    def empty(cls, dim: int = 1) -> "AnchorSet":
        return cls(np.empty(0), np.empty((0, dim)))


def _snap(grid: TimeGrid, anchors: AnchorSet, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Grid indices (floor convention) and values; merges identical collisions."""
    idx = np.array([grid.index_floor(t) for t in anchors.times], dtype=int)
    keep = np.ones(idx.size, dtype=bool)
    for i in range(1, idx.size):
        if idx[i] == idx[i - 1]:
            if np.max(np.abs(anchors.values[i] - anchors.values[i - 1])) > tol:
                gap = anchors.times[i] - anchors.times[i - 1]
                raise StepSizeError(f"anchors at t={anchors.times[i - 1]:.6g} and "
                                    f"t={anchors.times[i]:.6g} share a grid cell", gap / 2)
            keep[i] = False
    return idx[keep], anchors.values[keep]


@dataclass(frozen=True)
class BridgeSpec:
    """Reversed model plus anchors; backfill runs from the end of the grid to ``target_time``."""

    reversed_model: ReversedModel
    anchors: AnchorSet
    eps_hit: float = EPS_HIT
    target_time: Optional[float] = None
    _plan: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.eps_hit > 0:
            raise InvalidInputError("eps_hit must be positive")
        grid = self.reversed_model.grid
        target = grid.t_start if self.target_time is None else float(self.target_time)
        object.__setattr__(self, "target_time", target)
        i0 = grid.index_of(target)
        idx, vals = _snap(grid, self.anchors, self.eps_hit)
        if idx.size and (idx[0] <= i0 or idx[-1] >= grid.n_steps):
            raise InvalidInputError("anchor times must lie strictly inside the backfill window")
        if len(self.anchors) and vals.shape[1] != self.reversed_model.n:
            raise InvalidInputError("anchor dimension does not match the model")
        object.__setattr__(self, "_plan", _build_plan(self.reversed_model, idx, vals, i0))

    @property
    def grid(self) -> TimeGrid:
        return self.reversed_model.grid

    @property
    def anchor_indices(self) -> np.ndarray:
        return self._plan["idx"]

    @property
    def anchor_values(self) -> np.ndarray:
        return self._plan["vals"]

    def next_anchor(self, k: int) -> Optional[tuple[int, np.ndarray]]:
        """Index and value of the first anchor reached from grid index ``k``."""
        a = self._plan["target"][k]
        if a < 0:
            return None
        return int(self._plan["idx"][a]), self._plan["vals"][a]

    def transition(self, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(Phi, mu, Q)`` of the Gaussian transition from index ``k`` to its next anchor."""
        p = self._plan
        return p["Phi"][k], p["mu"][k], p["Q"][k]


def _build_plan(rm: ReversedModel, idx: np.ndarray, vals: np.ndarray, i0: int) -> dict:
    grid = rm.grid
    N, n, dt = grid.n_steps, rm.n, grid.dt
    a = rm.diffusion_cov
    target = -np.ones(N + 1, dtype=int)
    Phi = np.zeros((N + 1, n, n))
    mu = np.zeros((N + 1, n))
    Q = np.zeros((N + 1, n, n))
    gain = np.zeros((N + 1, n, n))
    eye = np.eye(n)
    bounds = list(idx) + [N]
    # walk anchors in the order the reversed clock reaches them
    for ai in reversed(range(idx.size)):
        ja = idx[ai]
        P_, m_, Q_ = eye.copy(), np.zeros(n), np.zeros((n, n))
        for j in range(ja + 1, bounds[ai + 1] + 1):
            M = eye + rm.drift_matrix[j] * dt
            m_ = m_ + P_ @ rm.drift_offset[j] * dt
            Q_ = Q_ + P_ @ a[j] @ P_.T * dt
            P_ = P_ @ M
            Q_ = 0.5 * (Q_ + Q_.T)
            target[j] = ai
            Phi[j], mu[j], Q[j] = P_, m_, Q_
            # close to an anchor a hypoelliptic Gramian is still rank deficient;
            # the pseudo-inverse steers the reachable directions and pinning does the rest
            gain[j] = a[j] @ P_.T @ np.linalg.pinv(Q_, rcond=1.0 / GRAMIAN_COND_MAX, hermitian=True)
        w = np.linalg.eigvalsh(Q_)
        if not w[0] > 0 or w[-1] / w[0] > GRAMIAN_COND_MAX:
            raise UnreachableAnchorError(float(grid.times[ja]), int(ai))
    return {"idx": idx, "vals": vals, "i0": i0, "target": target,
            "Phi": Phi, "mu": mu, "Q": Q, "gain": gain}


def bridge_drift(spec: BridgeSpec, t: float, x) -> np.ndarray:
    """Reversed drift plus the h-transform pull toward the next anchor."""
    k = spec.grid.index_of(t) if _on_grid(spec.grid, t) else spec.grid.index_floor(t) + 1
    x = np.asarray(x, dtype=float)
    return spec.reversed_model.drift_at(k, x) + _bridge_extra(spec, k, x)


def _on_grid(grid: TimeGrid, t: float) -> bool:
    x = (t - grid.t_start) / grid.dt
    return abs(x - round(x)) <= 1e-9 * max(1.0, abs(x))


def _bridge_extra(spec: BridgeSpec, k: int, x: np.ndarray) -> np.ndarray:
    p = spec._plan
    ai = p["target"][k]
    if ai < 0:
        return np.zeros_like(x)
    resid = p["vals"][ai] - x @ p["Phi"][k].T - p["mu"][k]
    return resid @ p["gain"][k].T


def conditioned_start_law(spec: BridgeSpec, start: GaussianState) -> GaussianState:
    """Weight a Gaussian start law by the probability of reaching the first anchor."""
    N = spec.grid.n_steps
    if spec.next_anchor(N) is None:
        return start
    _, z = spec.next_anchor(N)
    Phi, mu, Q = spec.transition(N)
    P = start.cov
    S = Phi @ P @ Phi.T + Q
    Kg = np.linalg.solve(S, Phi @ P).T
    mean = start.mean + Kg @ (z - Phi @ start.mean - mu)
    cov = P - Kg @ Phi @ P
    return GaussianState(mean, 0.5 * (cov + cov.T))


@dataclass(frozen=True)
class ConditionedEnsemble(Ensemble):
    """Backfilled paths with per-anchor hit errors and per-path Girsanov KL."""

    hit_errors: np.ndarray = None      # (n_paths, n_anchors)
    kl: np.ndarray = None              # (n_paths,)
    anchor_times: np.ndarray = None
    eps_hit: float = EPS_HIT
    excluded_steps: int = 0

    @property
    def accepted(self) -> np.ndarray:
        if self.hit_errors.shape[1] == 0:
            return np.ones(self.n_paths, dtype=bool)
        return np.max(self.hit_errors, axis=1) <= self.eps_hit

    @property
    def max_hit_error(self) -> float:
        return float(np.max(self.hit_errors)) if self.hit_errors.size else 0.0

    @property
    def mean_kl(self) -> float:
        return float(np.mean(self.kl))


def _kl_rate(extra: np.ndarray, a: np.ndarray) -> Optional[np.ndarray]:
    """``1/2 d' a^+ d`` per path, or None when ``d`` leaves the range of ``a``.

    A drift change outside the range of the diffusion has no Girsanov density,
    so such steps cannot be scored.
    """
    if not np.any(extra):
        return np.zeros(extra.shape[0])
    a_pinv = np.linalg.pinv(a, rcond=1.0 / GRAMIAN_COND_MAX, hermitian=True)
    leak = extra - extra @ (a @ a_pinv).T
    scale = np.max(np.abs(extra))
    if np.max(np.abs(leak)) > 1e-8 * scale:
        return None
    return 0.5 * np.einsum("pi,ij,pj->p", extra, a_pinv, extra)


def simulate_conditioned_backfill(spec: BridgeSpec, start, n_paths: int, seed: int,
                                  guide: Optional[Guide] = None) -> ConditionedEnsemble:
    """Simulate the bridged reversed SDE and accumulate the Girsanov KL.

    ``guide(k, x)`` replaces the h-transform term (used to compare other
    anchor-seeking drifts); strides that land on an anchor are pinned either
    way, and their implied drift ``(z - x) / ds`` enters the KL.
    """
    rm = spec.reversed_model
    grid, plan = spec.grid, spec._plan
    N, n, dt = grid.n_steps, rm.n, grid.dt
    i0 = plan["i0"]
    r = rm.diffusion.shape[-1]
    a = rm.diffusion_cov
    if guide is None:
        guide = lambda k, x: _bridge_extra(spec, k, x)  # noqa: E731
    anchor_at = {int(j): plan["vals"][i] for i, j in enumerate(plan["idx"])}
    x = _start_array(start, n_paths, n)
    dW = _rng.path_normals(seed, _rng.CONDITIONED, n_paths, (N - i0, r)) * np.sqrt(dt)
    out = np.empty((n_paths, N - i0 + 1, n))
    out[:, -1] = x
    kl = np.zeros(n_paths)
    excluded = 0
    for step, k in enumerate(range(N, i0, -1)):
        base = rm.drift_at(k, x)
        if k - 1 in anchor_at:
            x_new = np.broadcast_to(anchor_at[k - 1], x.shape).copy()
            extra = (x_new - x) / dt - base
        else:
            extra = guide(k, x)
            x_new = x + (base + extra) * dt + dW[:, step] @ rm.diffusion[k].T
        rate = _kl_rate(extra, a[k])
        if rate is None:
            excluded += 1
        else:
            kl += rate * dt
        x = x_new
        out[:, k - 1 - i0] = x
    if excluded:
        warnings.warn(f"{excluded} steps with degenerate diffusion excluded from the KL estimate")
    rel = plan["idx"] - i0
    hit = (np.max(np.abs(out[:, rel, :] - plan["vals"][None]), axis=2)
           if rel.size else np.zeros((n_paths, 0)))
    sub = grid.subgrid(i0, N) if i0 > 0 else grid
    return ConditionedEnsemble(sub, out, hit_errors=hit, kl=kl,
                               anchor_times=grid.times[plan["idx"]], eps_hit=spec.eps_hit,
                               excluded_steps=excluded)


def girsanov_kl(conditioned_drift, base_drift, diffusion_cov, dt: float):
    """Relative entropy ``1/2 sum (db)' a^-1 (db) dt`` along drift paths.

    Drift arrays have shape ``(steps, n)`` or ``(paths, steps, n)``;
    ``diffusion_cov`` is ``(steps, n, n)``.  A singular ``a`` is handled by
    its pseudo-inverse; steps whose drift gap leaves the range of ``a`` are
    skipped and reported with a warning.
    """
    d = np.asarray(conditioned_drift, dtype=float) - np.asarray(base_drift, dtype=float)
    single = d.ndim == 2
    if single:
        d = d[None]
    a = np.asarray(diffusion_cov, dtype=float)
    if a.ndim == 1:
        a = a[:, None, None]
    total = np.zeros(d.shape[0])
    skipped = []
    for s in range(d.shape[1]):
        rate = _kl_rate(d[:, s], a[s])
        if rate is None:
            skipped.append(s)
            continue
        total += rate * dt
    if skipped:
        warnings.warn(f"degenerate diffusion at steps {skipped[:10]}; excluded from KL")
    return float(total[0]) if single else total


def _relaxation_weights(grid: TimeGrid, anchors: AnchorSet, left, right) -> np.ndarray:
    """Matrix ``W`` with correction = ``W @ residuals``, shape ``(N+1, K)``."""
    idx = np.array([grid.index_floor(t) for t in anchors.times], dtype=int)
    if np.any(np.diff(idx) <= 0):
        raise InvalidInputError("duplicate anchor times after snapping to the grid")
    t = grid.times
    knots = t[idx]
    K = idx.size
    W = np.zeros((t.size, K))
    for i in range(K):
        e = np.zeros(K)
        e[i] = 1.0
        W[:, i] = np.interp(t, knots, e, left=0.0, right=0.0)
    for side, spec in (("left", left), ("right", right)):
        if spec is None:
            continue
        end = 0 if side == "left" else K - 1
        outside = t < knots[0] if side == "left" else t > knots[-1]
        if spec == "hold":
            W[outside, end] = 1.0
            continue
        edge = float(spec)
        if (side == "left" and edge >= knots[0]) or (side == "right" and edge <= knots[-1]):
            raise InvalidInputError(f"{side} taper point must lie outside the anchors")
        ramp = np.clip((t - edge) / (knots[0] - edge), 0.0, 1.0) if side == "left" else \
            np.clip((edge - t) / (edge - knots[-1]), 0.0, 1.0)
        W[outside, end] = ramp[outside]
    return W


def relax_paths(paths: np.ndarray, grid: TimeGrid, anchors: AnchorSet,
                left=None, right=None) -> np.ndarray:
    """Vectorized :func:`interpolation_relaxation` over ``(n_paths, N+1, n)`` arrays."""
    out = np.array(paths, dtype=float)
    if len(anchors) == 0:
        return out
    W = _relaxation_weights(grid, anchors, left, right)
    idx = np.array([grid.index_floor(t) for t in anchors.times], dtype=int)
    resid = anchors.values[None] - out[:, idx, :]          # (P, K, n)
    return out + np.einsum("tk,pkn->ptn", W, resid)


def interpolation_relaxation(base: PathSample, anchors: AnchorSet, left=None,
                             right=None) -> PathSample:
    """Add the piecewise-linear correction that makes ``base`` pass through the anchors.

    Between consecutive anchors the correction interpolates the residuals
    ``Y_i - b(tau_i)`` linearly.  Beyond the outermost anchors each side is
    controlled separately:

    * ``None``: no correction (identity outside the anchors),
    * a time beyond the anchors: the end residual ramps to zero there, so the
      path is continuous and unchanged past that time,
    * ``"hold"``: the end residual is kept constant.
    """
    return PathSample(base.grid, relax_paths(base.values[None], base.grid, anchors, left, right)[0])
