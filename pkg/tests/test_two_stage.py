import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from lotterybp.codes import build_surface_code, build_toric_code
from lotterybp.decoders import PLACEMENTS, BpConfig, bp_decode, majority_vote, osd0_decode, two_stage_decode
from lotterybp.noise import NoiseModel, sample_syndrome_window

S5 = build_surface_code(5)
T5 = build_toric_code(5)
CODES = {"surface": S5, "toric": T5}


def _window(code, p, p_meas, rounds, seed):
    return sample_syndrome_window(code, "X", NoiseModel(p, p_meas, rounds), np.random.default_rng(seed))


@settings(max_examples=60)
@given(
    seed=st.integers(0, 2**32 - 1),
    family=st.sampled_from(sorted(CODES)),
    placement=st.sampled_from(PLACEMENTS),
    policy=st.sampled_from(["none", "proposed", "global-optimal"]),
    rounds=st.integers(1, 5),
)
def test_noiseless_readout_matches_single_round(seed, family, placement, policy, rounds):
    code = CODES[family]
    w = _window(code, 0.06, 0.0, rounds, seed)
    cfg = BpConfig(max_iter=12, policy=policy)
    got = two_stage_decode(code, "X", w, 0.06, cfg, placement)
    ref = two_stage_decode(code, "X", w.ideal[None, :], 0.06, cfg, "single-round")
    assert np.array_equal(got.est_error, ref.est_error)
    assert got.converged == ref.converged


@settings(max_examples=80)
@given(
    seed=st.integers(0, 2**32 - 1),
    placement=st.sampled_from(PLACEMENTS),
    policy=st.sampled_from(["none", "proposed", "local-random"]),
    rounds=st.integers(1, 5),
)
def test_convergence_contract(seed, placement, policy, rounds):
    w = _window(S5, 0.05, 0.03, rounds, seed)
    cfg = BpConfig(max_iter=10, policy=policy)
    out = two_stage_decode(S5, "X", w, 0.05, cfg, placement, np.random.default_rng(seed))
    H = S5.check_matrix("X")
    if out.converged:
        assert not out.invoked_osd
        assert out.iterations < cfg.max_iter
        if placement != "mv-osd":
            target = w.measured[-1] if placement == "single-round" else majority_vote(w.measured)
            assert np.array_equal(oracles.matvec(H, out.est_error), target)
    else:
        assert out.invoked_osd
        assert out.iterations == cfg.max_iter


@settings(max_examples=40)
@given(seed=st.integers(0, 2**32 - 1))
def test_single_round_equals_bp_then_osd(seed):
    w = _window(S5, 0.07, 0.0, 1, seed)
    H = S5.check_matrix("X")
    cfg = BpConfig(max_iter=10, policy="proposed")
    draws = np.random.default_rng(seed).random(cfg.num_draws)
    bp = bp_decode(H, w.measured[0], 0.07, cfg, draws)
    out = two_stage_decode(S5, "X", w, 0.07, cfg, "single-round", draws)
    expected = bp.est_error if bp.converged else osd0_decode(H, bp.final_llr, w.measured[0])
    assert np.array_equal(out.est_error, expected)
    assert out.lottery_flips == bp.lottery_flips


def test_without_osd_nothing_invoked():
    for seed in range(30):
        w = _window(S5, 0.09, 0.0, 1, seed)
        out = two_stage_decode(S5, "X", w, 0.09, BpConfig(max_iter=6), "single-round", osd=False)
        assert not out.invoked_osd


def test_mv_bp_osd_runs_on_mean_llr():
    # two rounds that disagree on one check force the voted syndrome (tie -> 0) to differ from both
    H = S5.check_matrix("X")
    e = np.zeros(S5.n, dtype=np.uint8)
    e[[3, 11]] = 1
    s = oracles.matvec(H, e).astype(np.uint8)
    s2 = s.copy()
    s2[0] ^= 1
    s2[5] ^= 1
    cfg = BpConfig(max_iter=8)
    rows = np.vstack([s, s2])
    out = two_stage_decode(S5, "X", rows, 0.05, cfg, "mv-bp")
    r0 = bp_decode(H, s, 0.05, cfg)
    r1 = bp_decode(H, s2, 0.05, cfg)
    voted = majority_vote(rows)
    v_est = majority_vote(np.vstack([r0.est_error, r1.est_error]))
    if np.array_equal(oracles.matvec(H, v_est), voted):
        assert out.converged and np.array_equal(out.est_error, v_est)
    else:
        assert out.invoked_osd
        mean = (r0.final_llr + r1.final_llr) / 2
        assert np.allclose(out.final_llr, mean)
        assert np.array_equal(out.est_error, osd0_decode(H, mean, voted))


def test_explicit_draw_vector_length_checked():
    w = _window(S5, 0.05, 0.0, 3, 1)
    cfg = BpConfig(max_iter=10, policy="proposed")
    with pytest.raises(ValueError):
        two_stage_decode(S5, "X", w, 0.05, cfg, "mv-bp", np.zeros(cfg.num_draws))
    two_stage_decode(S5, "X", w, 0.05, cfg, "mv-bp", np.zeros(3 * cfg.num_draws))


def test_rejects_bad_inputs():
    cfg = BpConfig()
    with pytest.raises(ValueError):
        two_stage_decode(S5, "X", np.zeros((1, 3)), 0.05, cfg, "single-round")
    with pytest.raises(ValueError):
        two_stage_decode(S5, "X", np.zeros((1, 20)), 0.05, cfg, "vote-all")


def test_deterministic_given_seed():
    w = _window(T5, 0.08, 0.04, 5, 11)
    cfg = BpConfig(max_iter=12, policy="local-random")
    a = two_stage_decode(T5, "X", w, 0.08, cfg, "mv-osd", np.random.default_rng(5))
    b = two_stage_decode(T5, "X", w, 0.08, cfg, "mv-osd", np.random.default_rng(5))
    assert np.array_equal(a.est_error, b.est_error)
    assert (a.converged, a.iterations, a.lottery_flips) == (b.converged, b.iterations, b.lottery_flips)
