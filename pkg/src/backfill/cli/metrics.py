"""Scores of a backfill against the true path on the censored window ``t < T``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import InvalidInputError

ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class MethodScore:
    method: str
    rmse: float
    coverage50: float
    coverage90: float
    n_points: int
    max_hit_error: Optional[float] = None
    mean_kl: Optional[float] = None

    def items(self) -> dict:
        out = {f"{self.method}.rmse": self.rmse,
               f"{self.method}.coverage50": self.coverage50,
               f"{self.method}.coverage90": self.coverage90,
               f"{self.method}.n_points": self.n_points}
        if self.max_hit_error is not None:
            out[f"{self.method}.max_hit_error"] = self.max_hit_error
        if self.mean_kl is not None:
            out[f"{self.method}.mean_kl"] = self.mean_kl
        return out


def _align(truth_times, truth_values, times) -> np.ndarray:
    idx = np.searchsorted(truth_times, times - ALIGN_TOL)
    ok = (idx < truth_times.size)
    ok[ok] &= np.abs(truth_times[idx[ok]] - times[ok]) <= ALIGN_TOL * max(1.0, abs(times[-1]))
    if not np.all(ok):
        bad = times[~ok][0]
        raise InvalidInputError(f"backfill time {bad:.17g} has no matching truth time")
    return truth_values[idx]


def score(method: str, truth_times, truth_values, times, bands, liquidity_time: float,
          max_hit_error=None, mean_kl=None) -> MethodScore:
    """Score one backfill.

    ``bands`` has rows mean, median, q05, q25, q75, q95 on ``times``.  Only
    points strictly before ``liquidity_time`` count.
    """
    times = np.asarray(times, dtype=float)
    bands = np.asarray(bands, dtype=float)
    truth = _align(np.asarray(truth_times, dtype=float), np.asarray(truth_values, dtype=float), times)
    win = times < liquidity_time - ALIGN_TOL
    if not np.any(win):
        raise InvalidInputError("no backfill points before the liquidity time")
    y = truth[win]
    mean, _, q05, q25, q75, q95 = bands[:, win]
    rmse = float(np.sqrt(np.mean((mean - y) ** 2)))
    cov50 = float(np.mean((q25 <= y) & (y <= q75)))
    cov90 = float(np.mean((q05 <= y) & (y <= q95)))
    return MethodScore(method, rmse, cov50, cov90, int(win.sum()), max_hit_error, mean_kl)
