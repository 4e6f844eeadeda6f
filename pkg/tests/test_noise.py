import numpy as np
import pytest
from hypothesis import given, strategies as st

from lotterybp.codes import build_surface_code, build_toric_code
from lotterybp.noise import NoiseModel, sample_data_errors, sample_syndrome_window

import oracles

S3 = build_surface_code(3)


class TestDataErrors:
    def test_p0(self):
        assert not sample_data_errors(100, 0.0, np.random.default_rng(0)).any()

    def test_p1(self):
        assert sample_data_errors(100, 1.0, np.random.default_rng(0)).all()

    def test_binomial_mean(self):
        n, p = 10**6, 0.05
        e = sample_data_errors(n, p, np.random.default_rng(11))
        sigma = np.sqrt(p * (1 - p) / n)
        assert abs(e.mean() - p) < 3 * sigma

    def test_rejects_bad_p(self):
        with pytest.raises(ValueError):
            sample_data_errors(3, 1.5, np.random.default_rng(0))


class TestModel:
    def test_defaults(self):
        m = NoiseModel(0.03)
        assert m.meas_rate == 0.03 and m.rounds == 1 and m.mode == "static-data"

    @pytest.mark.parametrize(
        "kw", [dict(p_data=-0.1), dict(p_data=0.1, p_meas=2.0), dict(p_data=0.1, rounds=0), dict(p_data=0.1, mode="x")]
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            NoiseModel(**kw)


class TestWindow:
    def test_all_zero(self):
        w = sample_syndrome_window(S3, "X", NoiseModel(0.0, 0.0, rounds=4), np.random.default_rng(0))
        assert not w.measured.any() and w.rounds == 4

    def test_static_no_meas_error(self):
        w = sample_syndrome_window(S3, "X", NoiseModel(0.2, 0.0, rounds=5), np.random.default_rng(3))
        for row in w.measured:
            assert np.array_equal(row, w.ideal)

    def test_fixture_injection(self):
        e = np.zeros(13, dtype=np.uint8)
        e[[2, 8, 9]] = 1
        w = sample_syndrome_window(S3, "X", NoiseModel(0.0, 0.0, rounds=3), np.random.default_rng(0), inject=e)
        for row in w.measured:
            assert np.nonzero(row)[0].tolist() == [0, 1, 2, 5]
        assert np.array_equal(w.true_error, e)

    @given(st.integers(0, 2**32 - 1), st.sampled_from(["static-data", "per-round-data"]), st.integers(1, 5))
    def test_ideal_invariant(self, seed, mode, rounds):
        code = build_toric_code(3)
        w = sample_syndrome_window(code, "Z", NoiseModel(0.2, 0.1, rounds, mode), np.random.default_rng(seed))
        assert np.array_equal(w.ideal, oracles.matvec(code.h_z, w.true_error))
        assert w.measured.shape == (rounds, code.h_z.shape[0])

    @given(st.integers(0, 2**32 - 1))
    def test_replay(self, seed):
        model = NoiseModel(0.1, 0.05, 3, "per-round-data")
        a = sample_syndrome_window(S3, "X", model, np.random.default_rng(seed))
        b = sample_syndrome_window(S3, "X", model, np.random.default_rng(seed))
        assert np.array_equal(a.measured, b.measured) and np.array_equal(a.true_error, b.true_error)

    def test_meas_flip_rate(self):
        code = build_surface_code(9)
        rng = np.random.default_rng(5)
        model = NoiseModel(0.05, 0.03, rounds=10)
        flips = total = 0
        while total < 10**5:
            w = sample_syndrome_window(code, "X", model, rng)
            flips += int((w.measured ^ w.ideal).sum())
            total += w.measured.size
        p = 0.03
        assert abs(flips / total - p) < 3 * np.sqrt(p * (1 - p) / total)

    def test_per_round_accumulates(self):
        # with p_meas = 0 each round's syndrome is that of the running error;
        # the last round sees the full window error
        code = build_surface_code(5)
        w = sample_syndrome_window(code, "X", NoiseModel(0.1, 0.0, 6, "per-round-data"), np.random.default_rng(8))
        assert np.array_equal(w.measured[-1], w.ideal)
        assert len({tuple(r) for r in w.measured}) > 1
