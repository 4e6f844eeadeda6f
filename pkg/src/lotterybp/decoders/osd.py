"""Order-0 ordered statistics decoding."""

from __future__ import annotations

import numpy as np
from numba import njit

from ..gf2 import (
    UnsolvableSyndromeError,
    as_binary_matrix,
    as_bit_vector,
    gf2_back_solve,
    gf2_forward_solve,
    gf2_lu_decompose,
)


def osd0_decode(H, llr, s) -> np.ndarray:
    """Solve ``H e = s`` on the least reliable independent columns.

    Columns are ordered by ascending LLR (stable, so equal LLRs keep index
    order); the first rank(H) independent columns of the permuted matrix form
    the basis, everything else is set to zero.

    Raises UnsolvableSyndromeError when ``s`` is outside the column space.
    """
    H = as_binary_matrix(H)
    m, n = H.shape
    s = as_bit_vector(s, m)
    llr = np.asarray(llr, dtype=np.float64)
    if llr.shape != (n,):
        raise ValueError(f"expected {n} LLRs, got shape {llr.shape}")
    order = np.argsort(llr, kind="stable")
    fact = gf2_lu_decompose(H[:, order])
    y = gf2_forward_solve(fact.L, s[fact.row_perm])
    e_basis = gf2_back_solve(fact.U, y)
    e_perm = np.zeros(n, dtype=np.uint8)
    e_perm[fact.col_basis] = e_basis
    e = np.zeros(n, dtype=np.uint8)
    e[order] = e_perm
    return e


@njit(cache=True, nogil=True)
def osd0_run(H, llr, s, out):
    """Packed-row OSD-0 used inside the Monte Carlo kernels.

    Elimination carries the syndrome along (LU and forward substitution in
    one sweep), then back-substitutes on the pivot columns. Writes the
    estimate into ``out`` and returns False when ``s`` is not in the column
    space (``out`` then holds the solution of the consistent rows).
    """
    m, n = H.shape
    order = np.argsort(llr, kind="mergesort")
    W = (n + 63) // 64
    A = np.zeros((m, W), dtype=np.uint64)
    for r in range(m):
        for j in range(n):
            if H[r, order[j]]:
                A[r, j >> 6] |= np.uint64(1) << np.uint64(j & 63)
    y = s.copy()
    pivots = np.empty(m, dtype=np.int64)
    rank = 0
    for j in range(n):
        if rank == m:
            break
        w0 = j >> 6
        bit = np.uint64(1) << np.uint64(j & 63)
        p = -1
        for r in range(rank, m):
            if A[r, w0] & bit:
                p = r
                break
        if p < 0:
            continue
        if p != rank:
            for w in range(w0, W):
                t = A[p, w]
                A[p, w] = A[rank, w]
                A[rank, w] = t
            ty = y[p]
            y[p] = y[rank]
            y[rank] = ty
        for r in range(rank + 1, m):
            if A[r, w0] & bit:
                for w in range(w0, W):
                    A[r, w] ^= A[rank, w]
                y[r] ^= y[rank]
        pivots[rank] = j
        rank += 1
    ok = True
    for r in range(rank, m):
        if y[r]:
            ok = False
    eb = np.zeros(rank, dtype=np.uint8)
    for k in range(rank - 1, -1, -1):
        acc = int(y[k])
        for k2 in range(k + 1, rank):
            if eb[k2]:
                j2 = pivots[k2]
                if A[k, j2 >> 6] & (np.uint64(1) << np.uint64(j2 & 63)):
                    acc ^= 1
        eb[k] = acc
    for v in range(n):
        out[v] = 0
    for k in range(rank):
        if eb[k]:
            out[order[pivots[k]]] = 1
    return ok


def osd0_decode_fast(H, llr, s) -> np.ndarray:
    """Same contract as :func:`osd0_decode`, via the packed kernel."""
    H = as_binary_matrix(H)
    s = as_bit_vector(s, H.shape[0])
    out = np.zeros(H.shape[1], dtype=np.uint8)
    if not osd0_run(H, np.asarray(llr, dtype=np.float64), s, out):
        raise UnsolvableSyndromeError("syndrome is outside the column space of H")
    return out
