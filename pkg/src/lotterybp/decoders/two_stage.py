"""Local (lottery) BP followed by global OSD-0, with syndrome-vote placements.

Placements:

``single-round``  decode the last measured round.
``mv-synd``       majority-vote the rounds into one syndrome, then BP (+OSD).
``mv-bp``         BP on every round, vote the hard decisions; if the voted
                  estimate misses the voted syndrome, run OSD once on the mean
                  of the per-round posteriors.
``mv-osd``        BP (+OSD) on every round, vote the per-round estimates.

A window counts as converged when BP converged on its (voted) syndrome for
``single-round``/``mv-synd``, when the voted BP estimate satisfies the voted
syndrome for ``mv-bp``, and when every per-round BP converged for ``mv-osd``.
OSD is invoked exactly on the non-converged windows when enabled.

For the per-round placements ``iterations`` is the largest per-round count,
capped at ``max_iter - 1`` when the window converged.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..codes import CssCode, TannerGraph
from .bp import BpConfig, DecodeOutcome, _graph_arrays, bp_run, prior_llr
from .osd import osd0_run
from .quant import quant_params
from .vote import vote_rows

PLACEMENTS = ("single-round", "mv-synd", "mv-bp", "mv-osd")
PLACEMENT_CODE = {name: i for i, name in enumerate(PLACEMENTS)}


def runs_per_window(placement: str, rounds: int) -> int:
    """Number of BP decodes a placement performs on one window."""
    return rounds if placement in ("mv-bp", "mv-osd") else 1


@njit(cache=True, nogil=True)
def _satisfies(cn_ptr, edge_vn, est, s):
    for c in range(cn_ptr.shape[0] - 1):
        x = 0
        for e in range(cn_ptr[c], cn_ptr[c + 1]):
            x ^= est[edge_vn[e]]
        if x != s[c]:
            return False
    return True


@njit(cache=True, nogil=True)
def decode_window(
    H,
    cn_ptr,
    edge_vn,
    edge_cn,
    vn_ptr,
    vn_edges,
    measured,
    placement,
    use_osd,
    mu,
    max_iter,
    policy,
    skip,
    qp,
    scale_const,
    draws,
    est,
    lam,
):
    """Returns (converged, iterations, flips, invoked_osd)."""
    R, m = measured.shape
    n = est.shape[0]
    E = edge_vn.shape[0]
    nd = 2 * max_iter
    tl = np.zeros((0, n))
    tb = np.zeros((0, E))
    if placement == 0 or placement == 1:
        s = np.empty(m, dtype=np.uint8)
        if placement == 0:
            for c in range(m):
                s[c] = measured[R - 1, c]
        else:
            vote_rows(measured, s)
        conv, it, flips = bp_run(
            cn_ptr, edge_vn, edge_cn, vn_ptr, vn_edges, s, mu, max_iter, policy, skip, qp, scale_const,
            draws[:nd], est, lam, tl, tb,
        )
        invoked = False
        if not conv and use_osd:
            osd0_run(H, lam, s, est)
            invoked = True
        return conv, it, flips, invoked

    voted = np.empty(m, dtype=np.uint8)
    vote_rows(measured, voted)
    ests = np.zeros((R, n), dtype=np.uint8)
    lams = np.zeros((R, n))
    flips = 0
    worst = 0
    all_conv = True
    invoked = False
    for r in range(R):
        c_r, it_r, f_r = bp_run(
            cn_ptr, edge_vn, edge_cn, vn_ptr, vn_edges, measured[r], mu, max_iter, policy, skip, qp,
            scale_const, draws[r * nd : (r + 1) * nd], ests[r], lams[r], tl, tb,
        )
        flips += f_r
        if it_r > worst:
            worst = it_r
        if not c_r:
            all_conv = False
            if placement == 3 and use_osd:
                osd0_run(H, lams[r], measured[r], ests[r])
                invoked = True
    vote_rows(ests, est)
    for v in range(n):
        acc = 0.0
        for r in range(R):
            acc += lams[r, v]
        lam[v] = acc / R
    if placement == 2:
        if _satisfies(cn_ptr, edge_vn, est, voted):
            # a round that never converged still executed up to index max_iter - 1
            return True, min(worst, max_iter - 1), flips, False
        if use_osd:
            osd0_run(H, lam, voted, est)
            invoked = True
        return False, max_iter, flips, invoked
    return all_conv, worst if all_conv else max_iter, flips, invoked


def two_stage_decode(
    code: CssCode,
    sector: str,
    window,
    p: float,
    cfg: BpConfig,
    placement: str = "mv-synd",
    rng=None,
    *,
    osd: bool = True,
    graph: TannerGraph | None = None,
) -> DecodeOutcome:
    """Decode a :class:`~lotterybp.noise.SyndromeWindow` (or a rounds x m array)."""
    if placement not in PLACEMENT_CODE:
        raise ValueError(f"unknown placement {placement!r}; expected one of {PLACEMENTS}")
    H = code.check_matrix(sector)
    graph = graph or TannerGraph.from_matrix(H)
    measured = np.atleast_2d(np.asarray(getattr(window, "measured", window), dtype=np.uint8))
    if measured.shape[1] != H.shape[0]:
        raise ValueError(f"window has {measured.shape[1]} checks, H has {H.shape[0]}")
    measured = np.ascontiguousarray(measured)
    runs = runs_per_window(placement, measured.shape[0])
    nd = runs * cfg.num_draws
    if rng is None:
        draws = np.zeros(nd)
    elif isinstance(rng, np.random.Generator):
        draws = rng.random(nd)
    else:
        draws = np.asarray(rng, dtype=np.float64)
        if draws.shape != (nd,):
            raise ValueError(f"expected {nd} pre-drawn uniforms, got shape {draws.shape}")
    est = np.zeros(code.n, dtype=np.uint8)
    lam = np.zeros(code.n)
    conv, it, flips, invoked = decode_window(
        H, *_graph_arrays(graph), measured, PLACEMENT_CODE[placement], bool(osd), prior_llr(p),
        cfg.max_iter, cfg.policy_code, cfg.skip_iters, quant_params(cfg.quant), cfg.scaling or 0.0,
        draws, est, lam,
    )
    return DecodeOutcome(
        est_error=est,
        converged=bool(conv),
        iterations=int(it),
        invoked_osd=bool(invoked),
        lottery_flips=int(flips),
        final_llr=lam,
    )
