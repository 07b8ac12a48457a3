"""Pure-numpy implementations of the hot kernels.

Selected by :mod:`lenspipe.kernels` when the compiled extension is
unavailable.  Semantics (not bit patterns) match ``lenspipe._native``; both
operate in float64.
"""

from __future__ import annotations

import numpy as np


def laplacian_variance(grid: np.ndarray) -> float:
    """Variance of the 4-neighbour Laplacian response over interior pixels."""
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < 3 or g.shape[1] < 3:
        raise ValueError("grid must be 2-D and at least 3x3")
    resp = g[:-2, 1:-1] + g[2:, 1:-1] + g[1:-1, :-2] + g[1:-1, 2:] - 4.0 * g[1:-1, 1:-1]
    return float(resp.var())


def shannon_entropy(grid: np.ndarray) -> float:
    """Entropy in bits of the 256-bin intensity histogram of an 8-bit grid."""
    g = np.asarray(grid, dtype=np.uint8)
    if g.size == 0:
        raise ValueError("grid must be nonempty")
    counts = np.bincount(g.ravel(), minlength=256)
    p = counts[counts > 0] / float(g.size)
    return float(-(p * np.log2(p)).sum())


def dedup_scan(unit: np.ndarray, threshold: float, block: int = 2048) -> np.ndarray:
    """Greedy keep-first duplicate scan over unit-normalized rows.

    Returns int64 assignments: -1 where the row is kept, otherwise the index
    of the earliest previously kept row with cosine similarity strictly above
    ``threshold``.
    """
    x = np.ascontiguousarray(unit, dtype=np.float64)
    n = x.shape[0]
    assign = np.full(n, -1, dtype=np.int64)
    kept = np.zeros(n, dtype=bool)
    for start in range(0, n, block):
        stop = min(start + block, n)
        sims = x[start:stop] @ x[:stop].T
        for i in range(start, stop):
            row = sims[i - start, :i]
            hits = np.nonzero((row > threshold) & kept[:i])[0]
            if hits.size:
                assign[i] = hits[0]
            else:
                kept[i] = True
    return assign
