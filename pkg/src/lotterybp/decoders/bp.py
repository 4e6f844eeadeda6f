"""Normalized min-sum belief propagation with lottery sign flips.

The message-passing loop runs in a numba kernel over the flat edge arrays of
:class:`~lotterybp.codes.TannerGraph`. Every random choice made by a lottery
policy consumes pre-drawn uniforms (two per iteration) so a decode is a pure
function of its inputs and its draw vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numba import njit

from ..codes import TannerGraph
from ..gf2 import Gf2Error, as_binary_matrix, as_bit_vector
from .quant import FixedPointFormat, quant_params, qz

POLICIES = (
    "none",
    "proposed",
    "global-optimal",
    "global-connectivity",
    "local-random",
    "local-reliable",
)
POLICY_CODE = {name: i for i, name in enumerate(POLICIES)}

DRAWS_PER_ITER = 2


def default_max_iter(d: Optional[int]) -> int:
    """Iteration budget for a distance-``d`` code: max(2d, 12)."""
    return max(2 * int(d), 12) if d else 12


@dataclass(frozen=True)
class BpConfig:
    max_iter: int = 12
    policy: str = "none"
    skip_iters: int = 4
    quant: Optional[FixedPointFormat] = None
    scaling: Optional[float] = None  # None: 1 - 2^-(i+1)

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.skip_iters < 0:
            raise ValueError(f"skip_iters must be >= 0, got {self.skip_iters}")
        if self.policy not in POLICY_CODE:
            raise ValueError(f"unknown policy {self.policy!r}; expected one of {POLICIES}")
        if self.scaling is not None and not 0.0 < self.scaling <= 1.0:
            raise ValueError(f"scaling must lie in (0, 1], got {self.scaling}")

    @classmethod
    def for_distance(cls, d: Optional[int], **kw) -> "BpConfig":
        kw.setdefault("max_iter", default_max_iter(d))
        return cls(**kw)

    @property
    def policy_code(self) -> int:
        return POLICY_CODE[self.policy]

    @property
    def num_draws(self) -> int:
        return DRAWS_PER_ITER * self.max_iter


@dataclass
class BpState:
    """Soft state of one decode after an iteration (see :func:`bp_decode`)."""

    mu: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    lam: np.ndarray
    est_error: np.ndarray
    est_syndrome: np.ndarray
    prev_unsatisfied: np.ndarray
    iteration: int


@dataclass
class DecodeOutcome:
    """Result of a decode.

    ``iterations`` is the 0-based index of the iteration whose hard decision
    satisfied the syndrome, or ``max_iter`` when BP did not converge.
    """

    est_error: np.ndarray
    converged: bool
    iterations: int
    invoked_osd: bool = False
    lottery_flips: int = 0
    final_llr: np.ndarray = field(default_factory=lambda: np.zeros(0))


def prior_llr(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError(f"error probability must lie in (0, 1), got {p}")
    return math.log((1.0 - p) / p)


def cn_update_message(others: Sequence[float], s_c: int, i: int) -> float:
    """Check-to-variable message from the V2C values of the other neighbors."""
    others = list(others)
    if not others:
        raise ValueError("a check message needs at least one other neighbor")
    sign = -1.0 if s_c else 1.0
    for a in others:
        if a < 0:
            sign = -sign
    mag = min(abs(a) for a in others)
    if mag == 0.0:
        return 0.0
    return sign * (1.0 - 2.0 ** -(i + 1)) * mag


# --------------------------------------------------------------------------
# kernels
# --------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _unsat_count(v, unsat, edge_cn, vn_ptr, vn_edges):
    cnt = 0
    for k in range(vn_ptr[v], vn_ptr[v + 1]):
        cnt += unsat[edge_cn[vn_edges[k]]]
    return cnt


@njit(cache=True, nogil=True)
def _pick_unsat_check(unsat, r):
    N = 0
    for c in range(unsat.shape[0]):
        N += unsat[c]
    if N == 0:
        return -1
    k = int(math.floor(r * N))
    if k >= N:
        k = N - 1
    for c in range(unsat.shape[0]):
        if unsat[c]:
            if k == 0:
                return c
            k -= 1
    return -1


@njit(cache=True, nogil=True)
def lottery_pick(policy, unsat, lam, cn_ptr, edge_vn, edge_cn, vn_ptr, vn_edges, r1, r2):
    """Index of the variable whose LLR sign is flipped, or -1 for no flip."""
    n = lam.shape[0]
    if policy == 1 or policy == 4 or policy == 5:
        c = _pick_unsat_check(unsat, r1)
        if c < 0:
            return -1
        lo = cn_ptr[c]
        hi = cn_ptr[c + 1]
        if policy == 4:
            k = int(math.floor(r2 * (hi - lo)))
            if k >= hi - lo:
                k = hi - lo - 1
            return edge_vn[lo + k]
        best = -1
        best_cnt = -1
        best_abs = np.inf
        for e in range(lo, hi):
            v = edge_vn[e]
            cnt = _unsat_count(v, unsat, edge_cn, vn_ptr, vn_edges) if policy == 1 else 0
            a = abs(lam[v])
            if cnt > best_cnt or (cnt == best_cnt and a < best_abs):
                best = v
                best_cnt = cnt
                best_abs = a
        return best
    if policy == 2 or policy == 3:
        counts = np.zeros(n, dtype=np.int64)
        top = 0
        for v in range(n):
            counts[v] = _unsat_count(v, unsat, edge_cn, vn_ptr, vn_edges)
            if counts[v] > top:
                top = counts[v]
        if top == 0:
            return -1
        if policy == 2:
            best = -1
            best_abs = np.inf
            for v in range(n):
                if counts[v] == top and abs(lam[v]) < best_abs:
                    best = v
                    best_abs = abs(lam[v])
            return best
        K = 0
        for v in range(n):
            if counts[v] == top:
                K += 1
        k = int(math.floor(r1 * K))
        if k >= K:
            k = K - 1
        for v in range(n):
            if counts[v] == top:
                if k == 0:
                    return v
                k -= 1
    return -1


@njit(cache=True, nogil=True)
def bp_run(
    cn_ptr,
    edge_vn,
    edge_cn,
    vn_ptr,
    vn_edges,
    s,
    mu0,
    max_iter,
    policy,
    skip,
    qp,
    scale_const,
    draws,
    est,
    lam,
    trace_lam,
    trace_beta,
):
    """Run one decode; fills ``est`` and ``lam``.

    Returns (converged, iterations, flips). ``trace_*`` arrays of shape
    (max_iter, n) / (max_iter, E) record posteriors and C2V messages when
    they have max_iter rows; pass zero-row arrays to skip tracing.
    """
    m = cn_ptr.shape[0] - 1
    n = lam.shape[0]
    E = edge_vn.shape[0]
    tracing = trace_lam.shape[0] == max_iter
    mu = qz(mu0, qp)
    alpha = np.empty(E)
    beta = np.zeros(E)
    syn = np.empty(m, dtype=np.uint8)
    prev = np.empty(m, dtype=np.uint8)
    unsat = np.empty(m, dtype=np.uint8)
    flips = 0
    for i in range(max_iter):
        if i == 0:
            for e in range(E):
                alpha[e] = mu
        else:
            for e in range(E):
                alpha[e] = qz(lam[edge_vn[e]] - beta[e], qp)
        factor = scale_const if scale_const > 0.0 else 1.0 - 2.0 ** (-(i + 1))
        for c in range(m):
            lo = cn_ptr[c]
            hi = cn_ptr[c + 1]
            neg = int(s[c])
            min1 = np.inf
            min2 = np.inf
            arg = -1
            for e in range(lo, hi):
                a = alpha[e]
                if a < 0.0:
                    neg ^= 1
                    a = -a
                if a < min1:
                    min2 = min1
                    min1 = a
                    arg = e
                elif a < min2:
                    min2 = a
            for e in range(lo, hi):
                mag = min2 if e == arg else min1
                if mag == np.inf or mag == 0.0:
                    beta[e] = 0.0
                    continue
                sgn = neg ^ (1 if alpha[e] < 0.0 else 0)
                val = factor * mag
                beta[e] = qz(-val if sgn else val, qp)
        for v in range(n):
            acc = mu
            for k in range(vn_ptr[v], vn_ptr[v + 1]):
                acc += beta[vn_edges[k]]
            lam[v] = qz(acc, qp)
            est[v] = 1 if lam[v] <= 0.0 else 0
        if tracing:
            for v in range(n):
                trace_lam[i, v] = lam[v]
            for e in range(E):
                trace_beta[i, e] = beta[e]
        match = True
        for c in range(m):
            x = 0
            for e in range(cn_ptr[c], cn_ptr[c + 1]):
                x ^= est[edge_vn[e]]
            syn[c] = x
            if x != s[c]:
                match = False
        if match:
            return True, i, flips
        if policy != 0 and i >= skip and i >= 1 and i < max_iter - 1:
            for c in range(m):
                unsat[c] = 1 if prev[c] != s[c] else 0
            v = lottery_pick(
                policy,
                unsat,
                lam,
                cn_ptr,
                edge_vn,
                edge_cn,
                vn_ptr,
                vn_edges,
                draws[2 * i],
                draws[2 * i + 1],
            )
            if v >= 0:
                lam[v] = qz(-lam[v], qp)
                flips += 1
        for c in range(m):
            prev[c] = syn[c]
    return False, max_iter, flips


# --------------------------------------------------------------------------
# python entry points
# --------------------------------------------------------------------------


def _graph_arrays(graph: TannerGraph):
    return graph.cn_ptr, graph.edge_vn, graph.edge_cn, graph.vn_ptr, graph.vn_edges


def _draws(cfg: BpConfig, rng) -> np.ndarray:
    if rng is None:
        return np.zeros(cfg.num_draws)
    if isinstance(rng, np.random.Generator):
        return rng.random(cfg.num_draws)
    d = np.asarray(rng, dtype=np.float64)
    if d.shape != (cfg.num_draws,):
        raise ValueError(f"expected {cfg.num_draws} pre-drawn uniforms, got shape {d.shape}")
    return d


def bp_decode(
    H,
    s,
    p: float,
    cfg: BpConfig,
    rng=None,
    *,
    graph: Optional[TannerGraph] = None,
    trace: bool = False,
):
    """Decode syndrome ``s`` against ``H`` with (lottery) NMS BP.

    ``rng`` is a ``numpy.random.Generator`` or an explicit vector of
    ``cfg.num_draws`` uniforms; it is only consulted by randomized policies.
    With ``trace=True`` a ``(outcome, lam_history, beta_history)`` tuple is
    returned instead of the bare outcome.
    """
    H = as_binary_matrix(H)
    try:
        s = as_bit_vector(s, H.shape[0])
    except Gf2Error as exc:
        raise ValueError(f"syndrome does not match H: {exc}") from None
    graph = graph or TannerGraph.from_matrix(H)
    mu = prior_llr(p)
    draws = _draws(cfg, rng)
    n = H.shape[1]
    est = np.zeros(n, dtype=np.uint8)
    lam = np.zeros(n)
    I = cfg.max_iter
    tl = np.zeros((I, n)) if trace else np.zeros((0, n))
    tb = np.zeros((I, graph.num_edges)) if trace else np.zeros((0, graph.num_edges))
    conv, it, flips = bp_run(
        *_graph_arrays(graph),
        s,
        mu,
        I,
        cfg.policy_code,
        cfg.skip_iters,
        quant_params(cfg.quant),
        cfg.scaling or 0.0,
        draws,
        est,
        lam,
        tl,
        tb,
    )
    out = DecodeOutcome(est_error=est, converged=bool(conv), iterations=int(it), lottery_flips=int(flips), final_llr=lam)
    if trace:
        return out, tl[: min(it + 1, I)], tb[: min(it + 1, I)]
    return out


def lottery_select(state: BpState, graph: TannerGraph, policy: str, draws=(0.0, 0.0)) -> Optional[int]:
    """Variable chosen for a sign flip given the previous unsatisfied set.

    ``draws`` are the two uniforms in [0, 1) the randomized policies use:
    the first picks the unsatisfied check (index floor(r * N) among them in
    ascending order) or the global candidate, the second the neighbor for
    ``local-random``. Returns ``None`` when the unsatisfied set is empty.
    """
    code = POLICY_CODE[policy]
    if code == 0:
        return None
    unsat = np.zeros(graph.m, dtype=np.uint8)
    unsat[np.asarray(state.prev_unsatisfied, dtype=np.int64)] = 1
    r1, r2 = draws
    v = lottery_pick(code, unsat, np.asarray(state.lam, dtype=np.float64), *_graph_arrays(graph), float(r1), float(r2))
    return None if v < 0 else int(v)
