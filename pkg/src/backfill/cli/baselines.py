"""Deterministic fills of the censored window.

All three baselines see the same knots: each tick placed at its grid time,
followed by the first dense point at the liquidity time.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError


def _knots(tick_times, tick_values, first_dense: tuple[float, float]):
    t = np.append(np.asarray(tick_times, dtype=float), first_dense[0])
    v = np.append(np.asarray(tick_values, dtype=float).reshape(-1), first_dense[1])
    keep = np.append(np.diff(t) > 0, True)
    return t[keep], v[keep]


def flat_fill(times, tick_times, tick_values, first_dense) -> np.ndarray:
    """Constant at the last tick value, or the first dense value when there are no ticks."""
    v = np.asarray(tick_values, dtype=float).reshape(-1)
    level = v[-1] if v.size else float(first_dense[1])
    return np.full(np.shape(times), level)


def linear_fill(times, tick_times, tick_values, first_dense) -> np.ndarray:
    """Piecewise-linear through the knots, held constant before the first one."""
    kt, kv = _knots(tick_times, tick_values, first_dense)
    return np.interp(times, kt, kv)


def polynomial_fill(times, tick_times, tick_values, first_dense, degree: int = 3) -> np.ndarray:
    """Least-squares polynomial through the knots.

    The degree drops to ``len(knots) - 1`` when there are too few knots.
    """
    if degree < 0:
        raise InvalidInputError("degree must be non-negative")
    kt, kv = _knots(tick_times, tick_values, first_dense)
    deg = min(degree, kt.size - 1)
    if deg == 0:
        return np.full(np.shape(times), kv.mean())
    poly = np.polynomial.Polynomial.fit(kt, kv, deg)
    return poly(np.asarray(times, dtype=float))


BASELINES = {"flat": flat_fill, "linear": linear_fill, "polynomial": polynomial_fill}
