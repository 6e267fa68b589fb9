"""Uniform-grid neighbor search over agent positions.

Cells are radius-sized, so candidates for a fixed-radius query live in the
3x3 block around a point's cell. Pair generation scans only a half
neighborhood of offsets, yielding each unordered pair exactly once.
"""

from __future__ import annotations

import numpy as np

# (0,0) pairs inside a cell; the other four cover one half of the 8-neighborhood
_HALF_OFFSETS = ((0, 0), (0, 1), (1, -1), (1, 0), (1, 1))


def pairs_within(positions: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """All unordered index pairs with center distance <= radius.

    Returns (i, j) int arrays with i < j, sorted lexicographically.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    n = len(positions)
    if n < 2:
        return np.empty(0, np.int64), np.empty(0, np.int64)

    cell = np.floor(positions / radius).astype(np.int64)
    cell -= cell.min(axis=0)
    cell += 1  # pad so dy = -1 cannot wrap into the previous row
    stride = cell[:, 1].max() + 2
    key = cell[:, 0] * stride + cell[:, 1]
    order = np.argsort(key, kind="stable")
    skey = key[order]

    ii_parts, jj_parts = [], []
    for dx, dy in _HALF_OFFSETS:
        target = key + dx * stride + dy
        left = np.searchsorted(skey, target, side="left")
        right = np.searchsorted(skey, target, side="right")
        counts = right - left
        total = int(counts.sum())
        if total == 0:
            continue
        starts = np.cumsum(counts) - counts
        within = np.arange(total) - np.repeat(starts, counts)
        jj = order[np.repeat(left, counts) + within]
        ii = np.repeat(np.arange(n), counts)
        if (dx, dy) == (0, 0):
            keep = ii < jj  # same cell: drop self-pairs and mirror duplicates
            ii, jj = ii[keep], jj[keep]
        ii_parts.append(ii)
        jj_parts.append(jj)

    if not ii_parts:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    ii = np.concatenate(ii_parts)
    jj = np.concatenate(jj_parts)
    d2 = np.sum((positions[ii] - positions[jj]) ** 2, axis=1)
    keep = d2 <= radius * radius
    ii, jj = ii[keep], jj[keep]
    lo = np.minimum(ii, jj)
    hi = np.maximum(ii, jj)
    order = np.lexsort((hi, lo))
    return lo[order], hi[order]


def neighbor_lists(
    positions: np.ndarray, radius: float, max_neighbors: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-agent neighbors within radius, nearest first, capped in count.

    Ties in distance break on the lower index. Returns (flat, offsets):
    agent a's neighbors are flat[offsets[a]:offsets[a + 1]].
    """
    n = len(positions)
    lo, hi = pairs_within(positions, radius)
    src = np.concatenate([lo, hi])
    dst = np.concatenate([hi, lo])
    d2 = np.sum((positions[src] - positions[dst]) ** 2, axis=1)
    order = np.lexsort((dst, d2, src))
    src, dst = src[order], dst[order]
    starts = np.searchsorted(src, np.arange(n), side="left")
    ends = np.searchsorted(src, np.arange(n), side="right")
    counts = np.minimum(ends - starts, max_neighbors)
    total = int(counts.sum())
    within = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    flat = dst[np.repeat(starts, counts) + within]
    offsets = np.zeros(n + 1, np.int64)
    np.cumsum(counts, out=offsets[1:])
    return flat, offsets
