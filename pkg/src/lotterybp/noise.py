"""Phenomenological noise: independent data flips plus per-round readout flips.

Sampling is driven by a flat block of uniforms in [0, 1) so that the Python
API and the Monte Carlo kernels share one code path. The block layout for a
window with n data qubits, m checks and R rounds is::

    static-data     n data uniforms, then R*m measurement uniforms
    per-round-data  R*n data uniforms (round-major), then R*m measurement uniforms
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .codes import CssCode
from .gf2 import as_bit_vector

MODES = ("static-data", "per-round-data")
MODE_CODE = {name: i for i, name in enumerate(MODES)}


@dataclass(frozen=True)
class NoiseModel:
    p_data: float
    p_meas: Optional[float] = None  # None: same as p_data
    rounds: int = 1
    mode: str = "static-data"

    def __post_init__(self):
        for name, p in (("p_data", self.p_data), ("p_meas", self.meas_rate)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        if self.mode not in MODE_CODE:
            raise ValueError(f"unknown noise mode {self.mode!r}; expected one of {MODES}")

    @property
    def meas_rate(self) -> float:
        return self.p_data if self.p_meas is None else self.p_meas

    def num_uniforms(self, n: int, m: int) -> int:
        data = n if self.mode == "static-data" else self.rounds * n
        return data + self.rounds * m


@dataclass
class SyndromeWindow:
    true_error: np.ndarray
    measured: np.ndarray
    ideal: np.ndarray

    @property
    def rounds(self) -> int:
        return int(self.measured.shape[0])


@njit(cache=True, nogil=True)
def _syndrome(cn_ptr, edge_vn, err, out):
    for c in range(cn_ptr.shape[0] - 1):
        x = 0
        for e in range(cn_ptr[c], cn_ptr[c + 1]):
            x ^= err[edge_vn[e]]
        out[c] = x


@njit(cache=True, nogil=True)
def window_from_uniforms(cn_ptr, edge_vn, p_data, p_meas, rounds, mode, u, inject, true_err, measured, ideal):
    """Fill (true_err, measured, ideal) from uniforms ``u``.

    A non-empty ``inject`` replaces data-error sampling (its uniforms are
    still skipped so the measurement flips stay aligned).
    """
    n = true_err.shape[0]
    m = ideal.shape[0]
    injected = inject.shape[0] == n
    if mode == 0:
        for v in range(n):
            true_err[v] = inject[v] if injected else (1 if u[v] < p_data else 0)
        _syndrome(cn_ptr, edge_vn, true_err, ideal)
        off = n
        for r in range(rounds):
            for c in range(m):
                measured[r, c] = ideal[c] ^ (1 if u[off + r * m + c] < p_meas else 0)
    else:
        for v in range(n):
            true_err[v] = 0
        off = rounds * n
        for r in range(rounds):
            for v in range(n):
                if injected:
                    if r == 0:
                        true_err[v] = inject[v]
                elif u[r * n + v] < p_data:
                    true_err[v] ^= 1
            _syndrome(cn_ptr, edge_vn, true_err, ideal)
            for c in range(m):
                measured[r, c] = ideal[c] ^ (1 if u[off + r * m + c] < p_meas else 0)


def sample_data_errors(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return (rng.random(n) < p).astype(np.uint8)


def sample_syndrome_window(
    code: CssCode,
    sector: str,
    model: NoiseModel,
    rng: np.random.Generator,
    *,
    inject: Optional[np.ndarray] = None,
    graph=None,
) -> SyndromeWindow:
    """Sample one multi-round window for the ``sector`` check matrix.

    ``inject`` fixes the data error instead of sampling it (measurement flips
    are still sampled).
    """
    from .codes import TannerGraph

    H = code.check_matrix(sector)
    graph = graph or TannerGraph.from_matrix(H)
    m, n = H.shape
    u = rng.random(model.num_uniforms(n, m))
    inj = np.zeros(0, dtype=np.uint8) if inject is None else as_bit_vector(inject, n)
    true_err = np.zeros(n, dtype=np.uint8)
    measured = np.zeros((model.rounds, m), dtype=np.uint8)
    ideal = np.zeros(m, dtype=np.uint8)
    window_from_uniforms(
        graph.cn_ptr,
        graph.edge_vn,
        model.p_data,
        model.meas_rate,
        model.rounds,
        MODE_CODE[model.mode],
        u,
        inj,
        true_err,
        measured,
        ideal,
    )
    return SyndromeWindow(true_error=true_err, measured=measured, ideal=ideal)
