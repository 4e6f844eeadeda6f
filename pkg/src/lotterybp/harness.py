"""Monte Carlo engine: sample windows, decode, classify, aggregate.

Randomness is counter based. Trial ``t`` of a run seeded with ``master_seed``
reads its noise uniforms from Philox(key=(master_seed, 0)) and its lottery
uniforms from Philox(key=(master_seed, 1)), each at a fixed per-trial offset.
A trial's outcome therefore depends only on (config, t), never on how trials
are grouped into batches or spread over worker threads. Noise and lottery
streams are separate so that decoder variants sharing a seed see identical
error windows.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from numba import njit
from scipy.stats import binomtest

from .codes import CssCode, TannerGraph, build_surface_code, build_toric_code, load_bb_preset, load_code
from .decoders.bp import BpConfig, prior_llr
from .decoders.quant import FixedPointFormat, quant_params
from .decoders.two_stage import PLACEMENT_CODE, PLACEMENTS, decode_window, runs_per_window
from .decoders.vote import stabilization_round
from .noise import MODE_CODE, NoiseModel, window_from_uniforms

FAMILIES = ("surface", "toric", "bb", "file")
NOISE_STREAM = 0
LOTTERY_STREAM = 1
PRIOR_FLOOR = 1e-9


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CodeSpec:
    """How to obtain a code: a builtin family at distance ``d``, a BB preset, or a file."""

    family: str
    d: Optional[int] = None
    preset: Optional[str] = None
    path: Optional[str] = None
    fmt: str = "alist"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown code family {self.family!r}; expected one of {FAMILIES}")
        if self.family in ("surface", "toric") and (self.d is None or self.d < 2):
            raise ValueError(f"{self.family} code needs an integer distance d >= 2")
        if self.family == "bb" and not self.preset:
            raise ValueError("bb code needs a preset name")
        if self.family == "file" and not self.path:
            raise ValueError("file code needs a path")

    def build(self) -> CssCode:
        if self.family == "surface":
            return build_surface_code(self.d)
        if self.family == "toric":
            return build_toric_code(self.d)
        if self.family == "bb":
            return load_bb_preset(self.preset)
        return load_code(self.path, self.fmt, d=self.d)

    @property
    def label(self) -> str:
        if self.family == "bb":
            return self.preset
        if self.family == "file":
            return self.path
        return f"{self.family}_d{self.d}"

    def to_dict(self) -> dict:
        out = {"family": self.family}
        for key in ("d", "preset", "path"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        if self.family == "file":
            out["fmt"] = self.fmt
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "CodeSpec":
        return cls(**data)


@dataclass(frozen=True)
class RunConfig:
    code: CodeSpec
    noise: NoiseModel
    bp: BpConfig = field(default_factory=BpConfig)
    sector: str = "X"
    placement: str = "single-round"
    osd: bool = True
    min_failures: int = 100
    max_trials: int = 1_000_000
    master_seed: int = 0
    batch_size: int = 4096
    p_prior: Optional[float] = None  # decoder prior; None: p_data

    def __post_init__(self):
        if self.sector not in ("X", "Z"):
            raise ValueError(f"sector must be 'X' or 'Z', got {self.sector!r}")
        if self.placement not in PLACEMENT_CODE:
            raise ValueError(f"unknown placement {self.placement!r}; expected one of {PLACEMENTS}")
        if self.min_failures < 1:
            raise ValueError(f"min_failures must be >= 1, got {self.min_failures}")
        if self.max_trials < self.min_failures:
            raise ValueError(f"max_trials ({self.max_trials}) must be >= min_failures ({self.min_failures})")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.p_prior is not None and not 0.0 < self.p_prior < 1.0:
            raise ValueError(f"p_prior must lie in (0, 1), got {self.p_prior}")

    @property
    def decoder_prior(self) -> float:
        p = self.noise.p_data if self.p_prior is None else self.p_prior
        return min(max(p, PRIOR_FLOOR), 1.0 - PRIOR_FLOOR)

    def to_dict(self) -> dict:
        bp = self.bp
        return {
            "code": self.code.to_dict(),
            "sector": self.sector,
            "noise": {
                "p_data": self.noise.p_data,
                "p_meas": self.noise.meas_rate,
                "rounds": self.noise.rounds,
                "mode": self.noise.mode,
            },
            "bp": {
                "max_iter": bp.max_iter,
                "policy": bp.policy,
                "skip_iters": bp.skip_iters,
                "quant": None if bp.quant is None else str(bp.quant),
                "scaling": bp.scaling,
            },
            "placement": self.placement,
            "osd": self.osd,
            "min_failures": self.min_failures,
            "max_trials": self.max_trials,
            "master_seed": self.master_seed,
            "batch_size": self.batch_size,
            "p_prior": self.p_prior,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        bp = dict(data.pop("bp", {}))
        if bp.get("quant") is not None:
            bp["quant"] = FixedPointFormat.parse(bp["quant"])
        return cls(
            code=CodeSpec.from_dict(data.pop("code")),
            noise=NoiseModel(**data.pop("noise")),
            bp=BpConfig(**bp),
            **data,
        )


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------


def wilson_interval(k: int, n: int) -> tuple[float, float]:
    """95% Wilson score interval for k successes out of n."""
    if n == 0:
        return 0.0, 1.0
    ci = binomtest(k, n).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def _hist_add(a: dict, b: dict) -> dict:
    out = dict(a)
    for key, cnt in b.items():
        out[key] = out.get(key, 0) + cnt
    return dict(sorted(out.items()))


def _hist_from_counts(counts: np.ndarray) -> dict:
    return {int(i): int(c) for i, c in enumerate(counts) if c}


@dataclass
class MetricsReport:
    config: dict
    trials: int
    failures: int
    converged: int
    osd_invocations: int
    iteration_histogram: dict
    lottery_flip_histogram: dict
    vote_stabilization_histogram: dict
    upper_bound_only: bool = False
    wall_times: dict = field(default_factory=dict)

    @property
    def master_seed(self) -> int:
        return int(self.config["master_seed"])

    @property
    def logical_error_rate(self) -> float:
        return self.failures / self.trials if self.trials else 0.0

    @property
    def ler_ci(self) -> tuple[float, float]:
        return wilson_interval(self.failures, self.trials)

    @property
    def osd_invoke_rate(self) -> float:
        return self.osd_invocations / self.trials if self.trials else 0.0

    @property
    def converge_success_rate(self) -> float:
        return self.converged / self.trials if self.trials else 0.0

    @property
    def max_iter(self) -> int:
        return int(self.config["bp"]["max_iter"])

    @property
    def mean_iterations(self) -> float:
        if not self.trials:
            return 0.0
        return sum(i * c for i, c in self.iteration_histogram.items()) / self.trials

    @property
    def max_iter_fraction(self) -> float:
        if not self.trials:
            return 0.0
        return self.iteration_histogram.get(self.max_iter, 0) / self.trials

    @property
    def lottery_flip_stats(self) -> dict:
        total = sum(k * c for k, c in self.lottery_flip_histogram.items())
        return {
            "total": total,
            "mean_per_trial": total / self.trials if self.trials else 0.0,
            "max_per_trial": max(self.lottery_flip_histogram, default=0),
            "trials_with_flip": sum(c for k, c in self.lottery_flip_histogram.items() if k > 0),
        }

    def to_dict(self, *, wall_times: bool = True) -> dict:
        lo, hi = self.ler_ci
        out = {
            "config": self.config,
            "master_seed": self.master_seed,
            "trials": self.trials,
            "failures": self.failures,
            "converged": self.converged,
            "osd_invocations": self.osd_invocations,
            "logical_error_rate": self.logical_error_rate,
            "ler_ci_low": lo,
            "ler_ci_high": hi,
            "osd_invoke_rate": self.osd_invoke_rate,
            "converge_success_rate": self.converge_success_rate,
            "mean_iterations": self.mean_iterations,
            "max_iter_fraction": self.max_iter_fraction,
            "upper_bound_only": self.upper_bound_only,
            "iteration_histogram": {str(k): v for k, v in self.iteration_histogram.items()},
            "lottery_flip_histogram": {str(k): v for k, v in self.lottery_flip_histogram.items()},
            "lottery_flip_stats": self.lottery_flip_stats,
            "vote_stabilization_histogram": {str(k): v for k, v in self.vote_stabilization_histogram.items()},
        }
        if wall_times:
            out["wall_times"] = self.wall_times
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        def hist(key):
            return {int(k): int(v) for k, v in data.get(key, {}).items()}

        return cls(
            config=data["config"],
            trials=int(data["trials"]),
            failures=int(data["failures"]),
            converged=int(data["converged"]),
            osd_invocations=int(data["osd_invocations"]),
            iteration_histogram=hist("iteration_histogram"),
            lottery_flip_histogram=hist("lottery_flip_histogram"),
            vote_stabilization_histogram=hist("vote_stabilization_histogram"),
            upper_bound_only=bool(data.get("upper_bound_only", False)),
            wall_times=dict(data.get("wall_times", {})),
        )


def aggregate_reports(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Merge runs of one configuration (seeds may differ) by summing counts."""
    if not reports:
        raise ValueError("nothing to aggregate")

    def key(r):
        c = dict(r.config)
        c.pop("master_seed", None)
        return c

    base = key(reports[0])
    for i, r in enumerate(reports[1:], start=1):
        if key(r) != base:
            raise ValueError(f"report {i} was produced by a different configuration")
    if len(reports) == 1:
        return reports[0]
    out = MetricsReport(
        config=dict(reports[0].config),
        trials=0,
        failures=0,
        converged=0,
        osd_invocations=0,
        iteration_histogram={},
        lottery_flip_histogram={},
        vote_stabilization_histogram={},
    )
    run_s = 0.0
    for r in reports:
        out.trials += r.trials
        out.failures += r.failures
        out.converged += r.converged
        out.osd_invocations += r.osd_invocations
        out.iteration_histogram = _hist_add(out.iteration_histogram, r.iteration_histogram)
        out.lottery_flip_histogram = _hist_add(out.lottery_flip_histogram, r.lottery_flip_histogram)
        out.vote_stabilization_histogram = _hist_add(out.vote_stabilization_histogram, r.vote_stabilization_histogram)
        run_s += r.wall_times.get("run_s", 0.0)
    out.upper_bound_only = out.failures == 0
    out.wall_times = {"run_s": run_s}
    return out


# --------------------------------------------------------------------------
# failure classification and efficiency
# --------------------------------------------------------------------------


def logical_failure_check(code: CssCode, sector: str, true_error, est_error) -> bool:
    """True when the residual ``true_error ^ est_error`` is a nontrivial logical."""
    t = np.asarray(true_error, dtype=np.uint8).ravel()
    e = np.asarray(est_error, dtype=np.uint8).ravel()
    if t.shape != (code.n,) or e.shape != (code.n,):
        raise ValueError(f"error vectors must have length {code.n}")
    residual = (t ^ e) & 1
    return bool(((code.failure_logicals(sector).astype(np.int64) @ residual) & 1).any())


@dataclass(frozen=True)
class EfficiencyInput:
    num_decoding: float
    area_decoder: float
    t_margin: float
    t_decoder: float

    def __post_init__(self):
        for name in ("num_decoding", "area_decoder", "t_margin", "t_decoder"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a finite positive number, got {v!r}")


def latency_margin_ns(rounds: int, ns_per_round: float = 400.0) -> float:
    """Time budget for decoding a window of ``rounds`` syndrome rounds."""
    return ns_per_round * rounds


def decoding_efficiency(inp: EfficiencyInput) -> float:
    """Decodings per unit area, scaled by how far latency sits under the margin."""
    return (inp.num_decoding / inp.area_decoder) * (inp.t_margin / inp.t_decoder)


# --------------------------------------------------------------------------
# trial engine
# --------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def run_batch(
    H,
    cn_ptr,
    edge_vn,
    edge_cn,
    vn_ptr,
    vn_edges,
    logicals,
    p_data,
    p_meas,
    rounds,
    mode,
    placement,
    use_osd,
    mu,
    max_iter,
    policy,
    skip,
    qp,
    scale_const,
    noise_u,
    lot_u,
    inject,
    out_fail,
    out_conv,
    out_inv,
    out_iters,
    out_flips,
    out_vote,
):
    B = noise_u.shape[0]
    m, n = H.shape
    true_err = np.zeros(n, dtype=np.uint8)
    measured = np.zeros((rounds, m), dtype=np.uint8)
    ideal = np.zeros(m, dtype=np.uint8)
    est = np.zeros(n, dtype=np.uint8)
    lam = np.zeros(n)
    no_inject = np.zeros(0, dtype=np.uint8)
    injecting = inject.shape[0] == B
    for b in range(B):
        inj = inject[b] if injecting else no_inject
        window_from_uniforms(cn_ptr, edge_vn, p_data, p_meas, rounds, mode, noise_u[b], inj, true_err, measured, ideal)
        conv, it, fl, inv = decode_window(
            H, cn_ptr, edge_vn, edge_cn, vn_ptr, vn_edges, measured, placement, use_osd, mu, max_iter,
            policy, skip, qp, scale_const, lot_u[b], est, lam,
        )
        fail = False
        for r in range(logicals.shape[0]):
            x = 0
            for v in range(n):
                if logicals[r, v]:
                    x ^= true_err[v] ^ est[v]
            if x:
                fail = True
                break
        out_fail[b] = fail
        out_conv[b] = conv
        out_inv[b] = inv
        out_iters[b] = it
        out_flips[b] = fl
        out_vote[b] = stabilization_round(measured)


def _stride(count: int) -> int:
    # Philox advances its 4-word counter once per 4 doubles
    return max(4, -(-count // 4) * 4)


def _uniform_block(seed: int, stream: int, stride: int, start: int, count: int) -> np.ndarray:
    bg = np.random.Philox(key=np.array([seed, stream], dtype=np.uint64), counter=[start * stride // 4, 0, 0, 0])
    return np.random.Generator(bg).random((count, stride))


class _Engine:
    """Per-configuration arrays shared (read-only) by all worker threads."""

    def __init__(self, cfg: RunConfig, code: CssCode):
        self.cfg = cfg
        self.code = code
        self.H = np.ascontiguousarray(code.check_matrix(cfg.sector))
        self.graph = TannerGraph.from_matrix(self.H)
        self.logicals = np.ascontiguousarray(code.failure_logicals(cfg.sector))
        m, n = self.H.shape
        self.noise_count = cfg.noise.num_uniforms(n, m)
        self.lottery_count = runs_per_window(cfg.placement, cfg.noise.rounds) * cfg.bp.num_draws
        self.noise_stride = _stride(self.noise_count)
        self.lottery_stride = _stride(self.lottery_count)
        self.randomized = cfg.bp.policy not in ("none", "global-optimal")
        self.qp = quant_params(cfg.bp.quant)
        self.mu = prior_llr(cfg.decoder_prior)

    def draw(self, start: int, count: int) -> tuple[np.ndarray, np.ndarray]:
        seed = self.cfg.master_seed
        noise_u = _uniform_block(seed, NOISE_STREAM, self.noise_stride, start, count)
        if self.randomized:
            lot_u = _uniform_block(seed, LOTTERY_STREAM, self.lottery_stride, start, count)
        else:
            lot_u = np.zeros((count, self.lottery_stride))
        return noise_u, lot_u

    def run(self, noise_u, lot_u, inject, outs) -> None:
        cfg, g = self.cfg, self.graph
        run_batch(
            self.H, g.cn_ptr, g.edge_vn, g.edge_cn, g.vn_ptr, g.vn_edges, self.logicals,
            cfg.noise.p_data, cfg.noise.meas_rate, cfg.noise.rounds, MODE_CODE[cfg.noise.mode],
            PLACEMENT_CODE[cfg.placement], cfg.osd, self.mu, cfg.bp.max_iter, cfg.bp.policy_code,
            cfg.bp.skip_iters, self.qp, cfg.bp.scaling or 0.0, noise_u, lot_u, inject, *outs,
        )


def _chunks(count: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, count))
    edges = np.linspace(0, count, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_trials(
    cfg: RunConfig,
    workers: int = 1,
    *,
    code: Optional[CssCode] = None,
    inject: Optional[np.ndarray] = None,
) -> MetricsReport:
    """Run trials until ``min_failures`` failures or ``max_trials`` trials.

    The stop is exact: the run ends on the trial that brings the failure count
    to ``min_failures``, so the trial count does not depend on ``batch_size``
    or ``workers``.

    ``inject`` (trials x n) fixes the data error of trial t to ``inject[t]``
    and caps the run at ``len(inject)`` trials; measurement noise is still
    sampled.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    code = code or cfg.code.build()
    eng = _Engine(cfg, code)
    max_trials = cfg.max_trials
    if inject is not None:
        inject = np.ascontiguousarray(np.atleast_2d(inject), dtype=np.uint8)
        if inject.shape[1] != code.n:
            raise ValueError(f"injected errors must have {code.n} columns")
        max_trials = min(max_trials, inject.shape[0])
    I = cfg.bp.max_iter
    iter_counts = np.zeros(I + 1, dtype=np.int64)
    flip_counts: dict = {}
    vote_counts = np.zeros(cfg.noise.rounds + 2, dtype=np.int64)
    trials = failures = converged = invoked = 0
    batch_times = []
    t_run = time.perf_counter()
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while trials < max_trials and failures < cfg.min_failures:
            t_batch = time.perf_counter()
            B = min(cfg.batch_size, max_trials - trials)
            noise_u, lot_u = eng.draw(trials, B)
            inj = inject[trials : trials + B] if inject is not None else np.zeros((0, code.n), dtype=np.uint8)
            outs = (
                np.zeros(B, dtype=np.bool_),
                np.zeros(B, dtype=np.bool_),
                np.zeros(B, dtype=np.bool_),
                np.zeros(B, dtype=np.int64),
                np.zeros(B, dtype=np.int64),
                np.zeros(B, dtype=np.int64),
            )
            if pool is None:
                eng.run(noise_u, lot_u, inj, outs)
            else:
                jobs = [
                    pool.submit(
                        eng.run,
                        noise_u[a:b],
                        lot_u[a:b],
                        inj[a:b] if inj.shape[0] else inj,
                        tuple(o[a:b] for o in outs),
                    )
                    for a, b in _chunks(B, workers)
                ]
                for j in jobs:
                    j.result()
            fail, conv, inv, iters, flips, vote = outs
            need = cfg.min_failures - failures
            cum = np.cumsum(fail)
            if cum[-1] >= need:
                B = int(np.searchsorted(cum, need)) + 1
            trials += B
            failures += int(fail[:B].sum())
            converged += int(conv[:B].sum())
            invoked += int(inv[:B].sum())
            iter_counts += np.bincount(iters[:B], minlength=I + 1)[: I + 1]
            vote_counts += np.bincount(vote[:B], minlength=vote_counts.size)[: vote_counts.size]
            for k, c in zip(*np.unique(flips[:B], return_counts=True)):
                flip_counts[int(k)] = flip_counts.get(int(k), 0) + int(c)
            batch_times.append(time.perf_counter() - t_batch)
    finally:
        if pool is not None:
            pool.shutdown()
    run_s = time.perf_counter() - t_run
    total_iters = int((iter_counts * np.arange(I + 1)).sum()) + trials - int(iter_counts[I])
    return MetricsReport(
        config=cfg.to_dict(),
        trials=trials,
        failures=failures,
        converged=converged,
        osd_invocations=invoked,
        iteration_histogram=_hist_from_counts(iter_counts),
        lottery_flip_histogram=dict(sorted(flip_counts.items())),
        vote_stabilization_histogram=_hist_from_counts(vote_counts),
        upper_bound_only=failures == 0,
        wall_times={
            "run_s": run_s,
            "per_batch_s": run_s / len(batch_times) if batch_times else 0.0,
            "per_trial_s": run_s / trials if trials else 0.0,
            "per_iteration_s": run_s / total_iters if total_iters else 0.0,
            "batches": len(batch_times),
            "workers": workers,
        },
    )


def with_overrides(cfg: RunConfig, **kw) -> RunConfig:
    """Copy of ``cfg`` with top-level fields replaced (``None`` values ignored)."""
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
