"""Dense linear algebra over GF(2).

Matrices are plain ``numpy.uint8`` arrays holding 0/1 entries. Elimination
routines work on bit-packed rows (64 columns per ``uint64`` word) so that a
row operation is a handful of word XORs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

BinaryMatrix = np.ndarray


class Gf2Error(ValueError):
    """Rejected input to a GF(2) routine."""


class NotTriangularError(Gf2Error):
    pass


class SingularSystemError(Gf2Error, ArithmeticError):
    pass


class UnsolvableSyndromeError(Gf2Error, ArithmeticError):
    """Right-hand side lies outside the column space of the system."""


def as_binary_matrix(M) -> BinaryMatrix:
    """Validate ``M`` as a 2-D 0/1 matrix and return it as contiguous uint8."""
    A = np.asarray(M)
    if A.ndim != 2:
        raise Gf2Error(f"expected a 2-D matrix, got shape {A.shape}")
    if A.size and not np.isin(A, (0, 1)).all():
        raise Gf2Error("matrix entries must be 0 or 1")
    return np.ascontiguousarray(A, dtype=np.uint8)


def as_bit_vector(v, length: int | None = None) -> np.ndarray:
    a = np.asarray(v)
    if a.ndim != 1:
        raise Gf2Error(f"expected a 1-D bit vector, got shape {a.shape}")
    if a.size and not np.isin(a, (0, 1)).all():
        raise Gf2Error("vector entries must be 0 or 1")
    if length is not None and a.shape[0] != length:
        raise Gf2Error(f"dimension mismatch: expected length {length}, got {a.shape[0]}")
    return np.ascontiguousarray(a, dtype=np.uint8)


@dataclass(frozen=True)
class Gf2Factorization:
    """``M[row_perm][:, col_basis] == L @ U`` over GF(2).

    ``L`` is m x m unit lower triangular, ``U`` is m x r upper triangular
    with ones on its leading diagonal, where r = len(col_basis) = rank(M).
    """

    L: BinaryMatrix
    U: BinaryMatrix
    row_perm: np.ndarray
    col_basis: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.col_basis.shape[0])


# --------------------------------------------------------------------------
# packed-row kernels
# --------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def pack_rows(M):
    m, n = M.shape
    W = max(1, (n + 63) // 64)
    P = np.zeros((m, W), dtype=np.uint64)
    for r in range(m):
        for c in range(n):
            if M[r, c]:
                P[r, c >> 6] |= np.uint64(1) << np.uint64(c & 63)
    return P


@njit(cache=True, nogil=True)
def unpack_rows(P, ncols):
    m = P.shape[0]
    M = np.zeros((m, ncols), dtype=np.uint8)
    for r in range(m):
        for c in range(ncols):
            M[r, c] = (P[r, c >> 6] >> np.uint64(c & 63)) & np.uint64(1)
    return M


@njit(cache=True, nogil=True)
def _bit(P, r, c):
    return (P[r, c >> 6] >> np.uint64(c & 63)) & np.uint64(1)


@njit(cache=True, nogil=True)
def _swap_rows(P, a, b):
    for w in range(P.shape[1]):
        t = P[a, w]
        P[a, w] = P[b, w]
        P[b, w] = t


@njit(cache=True, nogil=True)
def _lu_packed(P, ncols, L):
    """Greedy left-to-right elimination with partial row pivoting.

    ``P`` is reduced in place to the U factor (restricted to pivot columns it
    is upper triangular). ``L`` receives the elimination multipliers.
    Returns (row_perm, pivot_cols).
    """
    m = P.shape[0]
    perm = np.arange(m)
    pivots = np.empty(min(m, ncols), dtype=np.int64)
    rank = 0
    for c in range(ncols):
        if rank == m:
            break
        p = -1
        for r in range(rank, m):
            if _bit(P, r, c):
                p = r
                break
        if p < 0:
            continue
        if p != rank:
            _swap_rows(P, p, rank)
            t = perm[p]
            perm[p] = perm[rank]
            perm[rank] = t
            for j in range(rank):
                tl = L[p, j]
                L[p, j] = L[rank, j]
                L[rank, j] = tl
        w0 = c >> 6
        for r in range(rank + 1, m):
            if _bit(P, r, c):
                for w in range(w0, P.shape[1]):
                    P[r, w] ^= P[rank, w]
                L[r, rank] = 1
        pivots[rank] = c
        rank += 1
    for r in range(m):
        L[r, r] = 1
    return perm, pivots[:rank].copy()


@njit(cache=True, nogil=True)
def _rref_packed(P, ncols):
    """Reduced row echelon form in place; returns pivot columns."""
    m = P.shape[0]
    pivots = np.empty(min(m, ncols), dtype=np.int64)
    rank = 0
    for c in range(ncols):
        if rank == m:
            break
        p = -1
        for r in range(rank, m):
            if _bit(P, r, c):
                p = r
                break
        if p < 0:
            continue
        if p != rank:
            _swap_rows(P, p, rank)
        for r in range(m):
            if r != rank and _bit(P, r, c):
                for w in range(P.shape[1]):
                    P[r, w] ^= P[rank, w]
        pivots[rank] = c
        rank += 1
    return pivots[:rank].copy()


@njit(cache=True, nogil=True)
def _rank_packed(P, ncols):
    m = P.shape[0]
    rank = 0
    for c in range(ncols):
        if rank == m:
            break
        p = -1
        for r in range(rank, m):
            if _bit(P, r, c):
                p = r
                break
        if p < 0:
            continue
        if p != rank:
            _swap_rows(P, p, rank)
        w0 = c >> 6
        for r in range(rank + 1, m):
            if _bit(P, r, c):
                for w in range(w0, P.shape[1]):
                    P[r, w] ^= P[rank, w]
        rank += 1
    return rank


# --------------------------------------------------------------------------
# public API
# --------------------------------------------------------------------------


def gf2_matvec(M, v) -> np.ndarray:
    """Return ``M @ v mod 2``."""
    M = as_binary_matrix(M)
    v = as_bit_vector(v, M.shape[1])
    return ((M.astype(np.int64) @ v) & 1).astype(np.uint8)


def gf2_matmul(A, B) -> BinaryMatrix:
    A = as_binary_matrix(A)
    B = as_binary_matrix(B)
    if A.shape[1] != B.shape[0]:
        raise Gf2Error(f"dimension mismatch: {A.shape} @ {B.shape}")
    return ((A.astype(np.int64) @ B.astype(np.int64)) & 1).astype(np.uint8)


def gf2_rank(M) -> int:
    M = as_binary_matrix(M)
    if M.size == 0:
        return 0
    return int(_rank_packed(pack_rows(M), M.shape[1]))


def gf2_lu_decompose(M) -> Gf2Factorization:
    """Factor the leftmost ``rank(M)`` independent columns of ``M``.

    Columns are scanned left to right; a column joins the basis when it has
    a pivot among the not-yet-used rows. Rank-deficient inputs are fine: the
    dependent columns are simply absent from ``col_basis``.
    """
    M = as_binary_matrix(M)
    m, n = M.shape
    P = pack_rows(M)
    L = np.zeros((m, m), dtype=np.uint8)
    perm, pivots = _lu_packed(P, n, L)
    U = unpack_rows(P, n)[:, pivots]
    return Gf2Factorization(L=L, U=np.ascontiguousarray(U), row_perm=perm, col_basis=pivots)


def gf2_forward_solve(L, s) -> np.ndarray:
    """Solve ``L y = s`` for unit lower triangular ``L``."""
    L = as_binary_matrix(L)
    m = L.shape[0]
    if L.shape[1] != m:
        raise NotTriangularError(f"L must be square, got {L.shape}")
    if np.triu(L, 1).any() or not L.diagonal().all():
        raise NotTriangularError("L is not unit lower triangular")
    s = as_bit_vector(s, m)
    y = s.copy()
    for i in range(1, m):
        y[i] ^= np.bitwise_xor.reduce(L[i, :i] & y[:i])
    return y


def gf2_back_solve(U, y) -> np.ndarray:
    """Solve ``U e = y`` for an m x r upper triangular ``U`` (r <= m).

    Rows beyond the leading r x r block must be zero in ``U``; the matching
    entries of ``y`` must then be zero as well or the system has no solution.
    """
    U = as_binary_matrix(U)
    m, r = U.shape
    if r > m:
        raise NotTriangularError(f"U has more columns than rows: {U.shape}")
    if np.tril(U, -1).any():
        raise NotTriangularError("U is not upper triangular")
    y = as_bit_vector(y, m)
    diag = U.diagonal()
    if not diag.all():
        raise SingularSystemError(f"zero on the diagonal of U at index {int(np.argmin(diag))}")
    if y[r:].any():
        raise UnsolvableSyndromeError("right-hand side is outside the column space")
    e = np.zeros(r, dtype=np.uint8)
    for i in range(r - 1, -1, -1):
        e[i] = y[i] ^ np.bitwise_xor.reduce(U[i, i + 1 : r] & e[i + 1 :])
    return e


def gf2_rref(M) -> tuple[BinaryMatrix, np.ndarray]:
    """Reduced row echelon form and pivot columns."""
    M = as_binary_matrix(M)
    P = pack_rows(M)
    pivots = _rref_packed(P, M.shape[1])
    return unpack_rows(P, M.shape[1]), pivots


def gf2_kernel(M) -> list[np.ndarray]:
    """Basis of the right null space ``{v : M v = 0}``."""
    M = as_binary_matrix(M)
    n = M.shape[1]
    R, pivots = gf2_rref(M)
    pivot_set = set(pivots.tolist())
    basis = []
    for f in range(n):
        if f in pivot_set:
            continue
        v = np.zeros(n, dtype=np.uint8)
        v[f] = 1
        for row, pc in enumerate(pivots):
            v[pc] = R[row, f]
        basis.append(v)
    return basis


def in_row_space(M, v) -> bool:
    """True when ``v`` is a GF(2) combination of the rows of ``M``."""
    M = as_binary_matrix(M)
    v = as_bit_vector(v, M.shape[1])
    return gf2_rank(np.vstack([M, v])) == gf2_rank(M)
