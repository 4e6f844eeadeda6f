import csv
import json
from pathlib import Path

import numpy as np
import pytest

from lotterybp.cli import CSV_COLUMNS, ConfigError, main, parse_experiment, read_reports
from lotterybp.codes import build_surface_code, format_alist
from lotterybp.harness import RunConfig

SMALL = """
seed = 2024
min_failures = 15
max_trials = 2000
batch_size = 128
p = [0.04, 0.06, 0.08]

[noise]
p_meas = 0.0

[[codes]]
family = "surface"
d = [3, 5]

[[decoders]]
policy = "none"
max_iter = 8

[[decoders]]
policy = "proposed"
max_iter = 8
"""


def _write(tmp_path, text, name="sweep.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def _simulate(tmp_path, text, *extra, out="out"):
    cfg = _write(tmp_path, text)
    rc = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / out), "--quiet", *extra])
    return rc, tmp_path / out


class TestParse:
    def test_grid_order_and_size(self):
        spec = parse_experiment(SMALL)
        grid = spec.grid()
        assert len(grid) == 2 * 3 * 2
        keys = [(g.code.d, g.noise.p_data, g.bp.policy) for g in grid]
        assert keys[:3] == [(3, 0.04, "none"), (3, 0.04, "proposed"), (3, 0.06, "none")]
        assert keys[-1] == (5, 0.08, "proposed")
        assert all(g.master_seed == 2024 and g.noise.meas_rate == 0.0 for g in grid)

    def test_rounds_d(self):
        spec = parse_experiment('p = [0.01]\n[noise]\nrounds = "d"\n[[codes]]\nfamily = "toric"\nd = [3, 5]\n[[decoders]]\n')
        assert [g.noise.rounds for g in spec.grid()] == [3, 5]

    def test_default_max_iter_follows_distance(self):
        spec = parse_experiment('p = [0.01]\n[[codes]]\nfamily = "surface"\nd = [3, 9]\n[[decoders]]\npolicy = "proposed"\n')
        assert [g.bp.max_iter for g in spec.grid()] == [12, 18]

    def test_quant_parsed(self):
        spec = parse_experiment('p = [0.01]\n[[codes]]\nfamily = "surface"\nd = 3\n[[decoders]]\nquant = "Int5.3"\n')
        assert str(spec.grid()[0].bp.quant) == "Int5.3"

    @pytest.mark.parametrize(
        "text, line, needle",
        [
            ('seed = 1\nbogus = 2\n', 2, "unknown key"),
            ('p = [0.1]\n\n[[decoders]]\npolicy = "coin"\n', 4, "unknown policy"),
            ('[[codes]]\nfamily = "surface"\nd = 3\n[[codes]]\nfamily = "torus"\n', 5, "unknown code family"),
            ('[noise]\nrounds = 0\n', 2, "rounds"),
            ('p = [0.1, 1.5]\n', 1, "p values"),
            ('[[decoders]]\nquant = "Int5"\n', 2, "fixed-point"),
            ('min_failures = 10\nmax_trials = 5\n', 2, "max_trials"),
            ('seed = [\n', 1, "invalid TOML"),
        ],
    )
    def test_errors_carry_line(self, text, line, needle):
        with pytest.raises(ConfigError) as exc:
            parse_experiment(text, "cfg.toml")
        msg = str(exc.value)
        assert msg.startswith(f"cfg.toml:{line}:"), msg
        assert needle in msg


class TestSimulate:
    def test_empty_grid(self, tmp_path):
        rc, out = _simulate(tmp_path, "seed = 1\n")
        assert rc == 0
        assert (out / "summary.csv").read_text() == ",".join(CSV_COLUMNS) + "\n"

    def test_noiseless_point_is_upper_bound(self, tmp_path):
        text = 'max_trials = 300\np = [0.0]\n[[codes]]\nfamily = "surface"\nd = 3\n[[decoders]]\npolicy = "proposed"\n'
        rc, out = _simulate(tmp_path, text)
        assert rc == 0
        rows = list(csv.DictReader((out / "summary.csv").open()))
        assert len(rows) == 1
        assert rows[0]["failures"] == "0"
        assert rows[0]["trials"] == "300"
        assert rows[0]["upper_bound_only"] == "1"

    def test_rerun_byte_identical_and_reports(self, tmp_path):
        rc1, out1 = _simulate(tmp_path, SMALL, out="a")
        rc2, out2 = _simulate(tmp_path, SMALL, "--workers", "4", out="b")
        assert rc1 == rc2 == 0
        assert (out1 / "summary.csv").read_bytes() == (out2 / "summary.csv").read_bytes()
        rows = list(csv.DictReader((out1 / "summary.csv").open()))
        assert len(rows) == 12
        assert list(rows[0]) == list(CSV_COLUMNS)
        reports = sorted((out1 / "reports").glob("*.json"))
        assert len(reports) == 12
        grid = parse_experiment(SMALL).grid()
        for path in reports:
            echo = json.loads(path.read_text())["config"]
            assert RunConfig.from_dict(echo) in grid

    def test_flag_overrides(self, tmp_path):
        text = 'seed = 3\nmax_trials = 400\np = [0.05]\n[[codes]]\nfamily = "surface"\nd = 3\n[[decoders]]\n'
        rc, out = _simulate(tmp_path, text, "--seed", "99", "--max-trials", "250", "--min-failures", "250")
        assert rc == 0
        row = next(csv.DictReader((out / "summary.csv").open()))
        assert row["seed"] == "99"
        assert row["trials"] == "250"

    def test_bad_config_exit(self, tmp_path, capsys):
        rc, _ = _simulate(tmp_path, 'p = [0.1]\n[[decoders]]\nplacement = "everywhere"\n')
        assert rc != 0
        assert "sweep.toml:3" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "none.toml"), "--quiet"]) != 0


class TestValidate:
    def test_surface_d3_passes(self, capsys):
        assert main(["validate", "--code", "surface", "--d", "3"]) == 0
        out = capsys.readouterr().out
        for check in ("CSS commutation", "rank/k consistency", "logical independence", "index-table bijection"):
            assert f"PASS {check}" in out
        assert "FAIL" not in out

    def test_toric_d5_rank(self, capsys):
        assert main(["validate", "--code", "toric", "--d", "5"]) == 0
        out = capsys.readouterr().out
        assert "rank(h_x)=24" in out and "k=2" in out

    def test_corrupted_alist_names_row(self, tmp_path, capsys):
        code = build_surface_code(3)
        h_x = code.h_x.copy()
        row = 2
        col = int(np.nonzero(h_x[row])[0][0])
        h_x[row, col] ^= 1
        path = tmp_path / "bad.alist"
        path.write_text(format_alist(h_x) + format_alist(code.h_z))
        rc = main(["validate", "--file", str(path)])
        out = capsys.readouterr().out
        assert rc != 0
        assert f"FAIL CSS commutation: h_x row {row}" in out

    def test_good_file_passes(self, tmp_path):
        code = build_surface_code(5)
        path = tmp_path / "s5.alist"
        path.write_text(format_alist(code.h_x) + format_alist(code.h_z))
        assert main(["validate", "--file", str(path)]) == 0

    def test_bb_preset(self, capsys):
        assert main(["validate", "--preset", "bb_72_12_6"]) == 0

    def test_needs_code(self):
        assert main(["validate"]) != 0


def test_code_info(capsys):
    assert main(["code-info", "--code", "toric", "--d", "3"]) == 0
    out = capsys.readouterr().out
    assert "n 18" in out and "k 2" in out
    assert "h_x rows 9 rank 8" in out


@pytest.fixture(scope="module")
def sweep(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("plot")
    rc, out = _simulate(tmp, SMALL)
    assert rc == 0
    return out


class TestPlotData:
    def test_ler_vs_p(self, sweep):
        assert main(["plot-data", "--reports", str(sweep), "--figure", "ler-vs-p"]) == 0
        files = sorted((sweep / "plot-data").glob("ler-vs-p__*.dat"))
        assert len(files) == 4
        for f in files:
            lines = f.read_text().splitlines()
            assert lines[0].startswith("#")
            ps = [float(line.split()[0]) for line in lines[1:]]
            assert ps == [0.04, 0.06, 0.08]

    def test_iter_hist_sums_to_trials(self, sweep):
        out = sweep / "iters"
        assert main(["plot-data", "--reports", str(sweep), "--figure", "iter-hist", "--out", str(out)]) == 0
        trials = {}
        for rep in read_reports(sweep):
            trials[rep.config["code"]["d"], rep.config["bp"]["policy"], rep.config["noise"]["p_data"]] = rep.trials
        files = sorted(out.glob("*.dat"))
        assert len(files) == 12
        total = sum(int(line.split()[1]) for f in files for line in f.read_text().splitlines()[1:])
        assert total == sum(trials.values())

    def test_vote_round_hist_noiseless_readout(self, sweep):
        out = sweep / "votes"
        assert main(["plot-data", "--reports", str(sweep), "--figure", "vote-round-hist", "--out", str(out)]) == 0
        reps = {Path(f).name: f for f in out.glob("*.dat")}
        assert reps
        by_trials = sorted(r.trials for r in read_reports(sweep))
        rows = sorted(f.read_text().splitlines()[1:] for f in out.glob("*.dat"))
        assert all(len(r) == 1 and r[0].split()[0] == "1" for r in rows)
        assert sorted(int(r[0].split()[1]) for r in rows) == by_trials

    def test_unknown_figure(self, sweep, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["plot-data", "--reports", str(sweep), "--figure", "pie-chart"])
        assert exc.value.code != 0
        assert "ler-vs-p" in capsys.readouterr().err

    def test_no_reports(self, tmp_path):
        assert main(["plot-data", "--reports", str(tmp_path), "--figure", "iter-hist"]) != 0
