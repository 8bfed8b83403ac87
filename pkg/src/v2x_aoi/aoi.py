"""Per-link age of information, per-period reward, and the normalized AoI metric."""

from __future__ import annotations

from typing import Sequence

import numpy as np


def initial_aoi(m: int) -> np.ndarray:
    """AoI of the first period: 1 on every link, 0 on the diagonal."""
    delta = np.ones((m, m), dtype=np.int64)
    np.fill_diagonal(delta, 0)
    return delta


def update_aoi(delta_prev: np.ndarray, x_prev: np.ndarray, n: int) -> np.ndarray:
    """One period of the AoI recursion, clamped to ``n + 1``.

    Works on a single (m, m) matrix or a stack (..., m, m).
    """
    delta_prev = np.asarray(delta_prev)
    x_prev = np.asarray(x_prev)
    if delta_prev.shape != x_prev.shape:
        raise ValueError("AoI and delivery matrices must have the same shape")
    delta = 1 + (1 - x_prev.astype(np.int64)) * delta_prev.astype(np.int64)
    delta = np.minimum(delta, n + 1)
    m = delta.shape[-1]
    delta[..., np.eye(m, dtype=bool)] = 0
    return delta


def reward(x: np.ndarray, m: int | None = None) -> float:
    x = np.asarray(x)
    m = x.shape[0] if m is None else m
    return float((2 * x.sum() - m * m) / (m * m))


def reward_bounds(m: int) -> tuple[float, float]:
    return -1.0, (m * m - 2 * m) / (m * m)


def normalized_aoi(history: Sequence[np.ndarray], n: int | None = None) -> float:
    """Mean off-diagonal AoI over all recorded periods, divided by ``n``.

    ``n`` defaults to the number of recorded periods.
    """
    if len(history) == 0:
        raise ValueError("empty AoI history")
    stack = np.asarray(history, dtype=float)
    n = stack.shape[0] if n is None else n
    m = stack.shape[1]
    off = ~np.eye(m, dtype=bool)
    return float(stack[:, off].mean() / n)


def total_aoi(history: Sequence[np.ndarray]) -> int:
    """Objective value: AoI summed over links and periods."""
    return int(np.asarray(history, dtype=np.int64).sum())
