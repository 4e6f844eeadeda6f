"""Temporal majority vote over measurement rounds."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def vote_rows(rows, out):
    """Per-column strict majority of a (rounds x m) 0/1 array; ties vote 0."""
    R, m = rows.shape
    for c in range(m):
        cnt = 0
        for r in range(R):
            cnt += rows[r, c]
        out[c] = 1 if 2 * cnt > R else 0


@njit(cache=True, nogil=True)
def stabilization_round(rows):
    R, m = rows.shape
    last_bad = 0
    for c in range(m):
        total = 0
        for r in range(R):
            total += rows[r, c]
        final = 2 * total > R
        cnt = 0
        for r in range(R):
            cnt += rows[r, c]
            if (2 * cnt > r + 1) != final and r + 1 > last_bad:
                last_bad = r + 1
    return last_bad + 1


def majority_vote(window, tie_rule: str = "zero") -> np.ndarray:
    """Compress a (rounds x m) syndrome window into one m-bit syndrome."""
    if tie_rule != "zero":
        raise ValueError(f"unsupported tie rule {tie_rule!r}")
    rows = np.atleast_2d(np.asarray(window, dtype=np.uint8))
    if rows.shape[0] < 1:
        raise ValueError("window needs at least one round")
    out = np.empty(rows.shape[1], dtype=np.uint8)
    vote_rows(np.ascontiguousarray(rows), out)
    return out


def vote_stabilization_round(window) -> int:
    """Smallest r such that voting any prefix of >= r rounds gives the final vote."""
    measured = getattr(window, "measured", window)
    rows = np.atleast_2d(np.asarray(measured, dtype=np.uint8))
    if rows.shape[0] < 1:
        raise ValueError("window needs at least one round")
    return int(stabilization_round(np.ascontiguousarray(rows)))
