"""Dynamic time warping between perception-switching curves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DomainError, UsageError


@dataclass(frozen=True)
class DtwResult:
    distance: float
    path: tuple[tuple[int, int], ...]


def _series(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise UsageError(f"{name} must be a non-empty 1-d series")
    if not np.isfinite(arr).all():
        raise DomainError(f"{name} contains non-finite values")
    return arr


def dtw_distance(x, y, *, window: int | None = None, normalize: bool = False) -> DtwResult:
    """Classic DTW with absolute-difference cost.

    ``D[i, j] = |x_i - y_j| + min(D[i-1, j-1], D[i-1, j], D[i, j-1])``. The
    returned path is recovered by backtracking from the last cell; on ties the
    diagonal step wins, then the step that decrements ``i``. ``window`` applies
    a Sakoe-Chiba band of that half-width and ``normalize`` divides the
    distance by the path length.
    """
    x = _series(x, "x")
    y = _series(y, "y")
    n, m = x.size, y.size
    if window is not None:
        if window < 0:
            raise UsageError("window must be >= 0")
        window = max(window, abs(n - m))

    acc = _accumulate(x, y, -1 if window is None else window)
    path = _backtrack(acc)
    distance = float(acc[n, m])
    if normalize:
        distance /= path.shape[0]
    return DtwResult(distance, tuple(map(tuple, path.tolist())))


@njit(cache=True)
def _accumulate(x, y, window):
    n, m = x.size, y.size
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        lo, hi = 1, m
        if window >= 0:
            lo, hi = max(1, i - window), min(m, i + window)
        for j in range(lo, hi + 1):
            best = acc[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = abs(x[i - 1] - y[j - 1]) + best
    return acc


@njit(cache=True)
def _backtrack(acc):
    n, m = acc.shape[0] - 1, acc.shape[1] - 1
    out = np.empty((n + m - 1, 2), dtype=np.int64)
    k = 0
    i, j = n, m
    out[k] = (n - 1, m - 1)
    while i != 1 or j != 1:
        # strict comparisons keep the diagonal on ties, then (i-1, j)
        bi, bj = i - 1, j - 1
        if acc[i - 1, j] < acc[bi, bj]:
            bi, bj = i - 1, j
        if acc[i, j - 1] < acc[bi, bj]:
            bi, bj = i, j - 1
        i, j = bi, bj
        k += 1
        out[k] = (i - 1, j - 1)
    return out[k::-1]


def dtw_matrix(series: list, **kwargs) -> np.ndarray:
    """Symmetric pairwise DTW distances with a zero diagonal."""
    k = len(series)
    out = np.zeros((k, k))
    for a in range(k):
        for b in range(a + 1, k):
            out[a, b] = out[b, a] = dtw_distance(series[a], series[b], **kwargs).distance
    return out
