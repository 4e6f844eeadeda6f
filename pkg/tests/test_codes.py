import numpy as np
import pytest
from hypothesis import given, strategies as st

from lotterybp.codes import (
    CodeError,
    TannerGraph,
    bb_presets,
    build_bb_code,
    build_surface_code,
    build_toric_code,
    cn_to_vn_indices,
    compute_logicals,
    format_alist,
    load_bb_preset,
    load_code,
    make_css_code,
    num_checks,
    read_matrix,
    read_matrix_pair,
    save_code,
    table_corrections,
    table_relabeling,
    write_matrix,
)

import oracles

DISTANCES = [3, 5, 7, 9]


def check_css(code):
    assert not ((code.h_x.astype(int) @ code.h_z.T.astype(int)) % 2).any()
    assert code.k == code.n - oracles.rank_int(code.h_x) - oracles.rank_int(code.h_z)
    for lx in code.logicals_x:
        assert not oracles.matvec(code.h_z, lx).any()
        assert not oracles.in_span(code.h_x, lx)
    for lz in code.logicals_z:
        assert not oracles.matvec(code.h_x, lz).any()
        assert not oracles.in_span(code.h_z, lz)
    if code.k:
        pairing = (code.logicals_x.astype(int) @ code.logicals_z.T.astype(int)) % 2
        assert oracles.rank_int(pairing) == code.k


class TestSurface:
    def test_d3_parameters(self):
        c = build_surface_code(3)
        assert (c.n, c.k, c.d) == (13, 1, 3)
        assert c.h_x.shape == (6, 13) and c.h_z.shape == (6, 13)

    def test_d5(self):
        c = build_surface_code(5)
        assert (c.n, c.k) == (41, 1)

    @pytest.mark.parametrize("d", DISTANCES)
    def test_css_invariants(self, d):
        c = build_surface_code(d)
        assert c.n == d * d + (d - 1) ** 2
        check_css(c)

    def test_d3_min_logical_weight(self):
        c = build_surface_code(3)
        assert oracles.min_logical_weight(c.h_z, c.h_x, 3) == 3
        assert oracles.min_logical_weight(c.h_x, c.h_z, 3) == 3

    def test_d5_distance(self):
        c = build_surface_code(5)
        assert oracles.min_logical_weight(c.h_z, c.h_x, 4) is None
        assert oracles.min_logical_weight(c.h_z, c.h_x, 5) == 5

    def test_fixture_signature(self):
        c = build_surface_code(3)
        e = np.zeros(13, dtype=np.uint8)
        e[[2, 8, 9]] = 1
        assert np.nonzero(oracles.matvec(c.h_x, e))[0].tolist() == [0, 1, 2, 5]

    @pytest.mark.parametrize("d", [1, 2, 4, 0])
    def test_rejects_bad_distance(self, d):
        with pytest.raises(CodeError):
            build_surface_code(d)

    @pytest.mark.parametrize("d", DISTANCES)
    def test_tanner_degrees(self, d):
        for H in (build_surface_code(d).h_x, build_surface_code(d).h_z):
            g = TannerGraph.from_matrix(H)
            assert g.cn_degrees().max() <= 4
            assert g.vn_degrees().max() <= 2


class TestToric:
    def test_d3(self):
        c = build_toric_code(3)
        assert (c.n, c.k) == (18, 2)
        assert oracles.rank_int(c.h_x) == 8

    @pytest.mark.parametrize("d", [2, 3, 4, 5, 7, 9])
    def test_invariants(self, d):
        c = build_toric_code(d)
        assert c.n == 2 * d * d and c.k == 2
        check_css(c)
        assert oracles.rank_int(c.h_x) == d * d - 1
        assert oracles.rank_int(c.h_z) == d * d - 1
        for H in (c.h_x, c.h_z):
            g = TannerGraph.from_matrix(H)
            assert set(g.cn_degrees().tolist()) == {4}
            assert set(g.vn_degrees().tolist()) == {2}

    def test_rejects_small(self):
        with pytest.raises(CodeError):
            build_toric_code(1)


class TestBB:
    def test_degenerate_single_shift(self):
        c = build_bb_code(1, 1, [(0, 0)], [(0, 0)])
        assert c.h_x.tolist() == [[1, 1]] and c.h_z.tolist() == [[1, 1]] and c.n == 2

    @pytest.mark.parametrize("key", sorted(bb_presets()))
    def test_presets(self, key):
        meta = bb_presets()[key]
        c = load_bb_preset(key)
        assert (c.n, c.k, c.d) == (meta["n"], meta["k"], meta["d"])
        if c.n <= 144:
            check_css(c)

    @given(
        st.integers(1, 6),
        st.integers(1, 6),
        st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=3),
        st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=3),
    )
    def test_commutation_any_input(self, l, m, a, b):
        a = [(x % l, y % m) for x, y in a]
        b = [(x % l, y % m) for x, y in b]
        c = build_bb_code(l, m, a, b)
        assert not ((c.h_x.astype(int) @ c.h_z.T.astype(int)) % 2).any()
        assert len(c.logicals_x) == c.k == len(c.logicals_z)

    def test_rejects_out_of_range(self):
        with pytest.raises(CodeError):
            build_bb_code(3, 3, [(3, 0)], [(0, 0)])

    def test_unknown_preset(self):
        with pytest.raises(CodeError):
            load_bb_preset("bb_nope")


class TestLogicals:
    def test_surface_counts(self):
        lx, lz = compute_logicals(build_surface_code(3).h_x, build_surface_code(3).h_z)
        assert lx.shape == (1, 13) and lz.shape == (1, 13)

    def test_toric_counts(self):
        c = build_toric_code(3)
        lx, lz = compute_logicals(c.h_x, c.h_z)
        assert len(lx) == 2 and len(lz) == 2

    def test_rejects_noncommuting(self):
        with pytest.raises(CodeError):
            compute_logicals([[1, 0]], [[1, 1]])

    def test_make_css_names_row(self):
        h_x = build_surface_code(3).h_x.copy()
        h_x[4, 0] ^= 1
        with pytest.raises(CodeError, match="row 4"):
            make_css_code(h_x, build_surface_code(3).h_z)


class TestFiles:
    @pytest.mark.parametrize("fmt", ["alist", "dense"])
    def test_roundtrip(self, tmp_path, fmt):
        c = build_surface_code(3)
        path = tmp_path / f"s3.{fmt}"
        save_code(c, path, fmt)
        back = load_code(path, fmt, d=3)
        assert np.array_equal(back.h_x, c.h_x) and np.array_equal(back.h_z, c.h_z)
        assert back.k == 1 and back.d == 3

    def test_toric_alist_columns(self, tmp_path):
        path = tmp_path / "t5.alist"
        write_matrix(build_toric_code(5).h_x, path)
        assert read_matrix(path).shape == (25, 50)

    def test_alist_header(self):
        lines = format_alist(np.array([[1, 1, 0], [0, 1, 1]], dtype=np.uint8)).splitlines()
        assert lines[:4] == ["3 2", "2 2", "1 2 1", "2 2"]
        assert lines[4:7] == ["1 0", "1 2", "2 0"]
        assert lines[7:] == ["1 2", "2 3"]

    def test_commutation_violation(self, tmp_path):
        c = build_surface_code(3)
        h_x = c.h_x.copy()
        h_x[2, 0] ^= 1
        path = tmp_path / "bad.alist"
        path.write_text(format_alist(h_x) + format_alist(c.h_z))
        with pytest.raises(CodeError, match="row 2"):
            load_code(path)

    def test_parse_error_has_line(self, tmp_path):
        path = tmp_path / "bad.dense"
        path.write_text("3 2\n1 1 0\n0 x 1\n3 1\n1 1 1\n")
        with pytest.raises(CodeError, match="line 3"):
            read_matrix_pair(path, "dense")

    def test_dimension_mismatch(self, tmp_path):
        path = tmp_path / "mm.dense"
        path.write_text("2 1\n1 1\n3 1\n1 1 0\n")
        with pytest.raises(CodeError):
            read_matrix_pair(path, "dense")

    def test_comments_allowed(self, tmp_path):
        path = tmp_path / "c.dense"
        path.write_text("# header\n2 1  # n m\n1 1\n2 1\n1 1\n")
        h_x, h_z = read_matrix_pair(path, "dense")
        assert h_x.tolist() == [[1, 1]]


class TestTable:
    def test_surface_z_i0(self):
        assert cn_to_vn_indices("surface", "Z", 3, 0) == [0, 1, None, 9]
        assert cn_to_vn_indices("surface", "Z", 3, 0, corrected=False) == [0, 1, None, 9]

    def test_surface_x_i0(self):
        assert cn_to_vn_indices("surface", "X", 3, 0) == [0, 3, None, 9]

    def test_toric_z_wrap(self):
        assert cn_to_vn_indices("toric", "Z", 3, 2)[1] == 0

    def test_out_of_range(self):
        with pytest.raises(CodeError):
            cn_to_vn_indices("surface", "X", 3, num_checks("surface", 3))

    @pytest.mark.parametrize("family", ["surface", "toric"])
    @pytest.mark.parametrize("d", DISTANCES)
    def test_bijection(self, family, d):
        code = build_surface_code(d) if family == "surface" else build_toric_code(d)
        rel = table_relabeling(code, family)
        assert rel["X"][0] == "h_z" and rel["Z"][0] == "h_x"
        for check, (mat, rows) in rel.items():
            H = getattr(code, mat)
            assert sorted(rows) == list(range(H.shape[0]))
            for i, r in enumerate(rows):
                table = {v for v in cn_to_vn_indices(family, check, d, i) if v is not None}
                assert table == set(np.nonzero(H[r])[0].tolist())

    def test_verbatim_table_fails_where_corrected(self):
        for family, check in (("surface", "Z"), ("toric", "X")):
            code = build_surface_code(5) if family == "surface" else build_toric_code(5)
            assert table_relabeling(code, family, corrected=False)[check] is None
            assert table_relabeling(code, family, corrected=False)["Z" if check == "X" else "X"] is not None
        assert table_corrections("surface", 5) and table_corrections("toric", 5)
