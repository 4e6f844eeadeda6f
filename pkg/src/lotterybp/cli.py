"""Command-line front end.

Subcommands::

    lotterybp simulate   --config sweep.toml [--seed N] [--workers N] [--out DIR]
    lotterybp validate   (--code surface --d 3 | --preset bb_72_12_6 | --file H.alist)
    lotterybp code-info  (same code selectors as validate)
    lotterybp plot-data  --reports DIR --figure {ler-vs-p,invoke-vs-p,iter-hist,vote-round-hist}

A sweep config is TOML. Grid axes are ``[[codes]]`` tables, a top-level ``p``
list and ``[[decoders]]`` tables; points are enumerated code-major in
declaration order::

    seed = 2024
    min_failures = 100
    max_trials = 1000000
    p = [0.01, 0.02]

    [noise]
    p_meas = 0.0        # omit for p_meas = p
    rounds = 1          # or "d"

    [[codes]]
    family = "surface"
    d = [3, 5]

    [[decoders]]
    policy = "proposed"
    placement = "single-round"
    osd = true
    quant = "Int5.3"    # omit for floating point
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .codes import (
    CodeError,
    TannerGraph,
    bb_presets,
    build_surface_code,
    build_toric_code,
    commutation_violations,
    compute_logicals,
    load_bb_preset,
    read_matrix_pair,
    table_relabeling,
)
from .decoders.bp import POLICIES, BpConfig
from .decoders.quant import FixedPointFormat
from .decoders.two_stage import PLACEMENTS
from .gf2 import gf2_matmul, gf2_rank
from .harness import CodeSpec, MetricsReport, RunConfig, run_trials
from .noise import MODES, NoiseModel

CSV_COLUMNS = (
    "family",
    "d",
    "p",
    "policy",
    "placement",
    "quant",
    "trials",
    "failures",
    "ler",
    "ler_ci_low",
    "ler_ci_high",
    "invoke_rate",
    "mean_iters",
    "max_iter_frac",
    "seed",
    "upper_bound_only",
)
FIGURES = ("ler-vs-p", "invoke-vs-p", "iter-hist", "vote-round-hist")


class ConfigError(ValueError):
    def __init__(self, path, line: Optional[int], msg: str):
        where = f"{path}:{line}" if line else str(path)
        super().__init__(f"{where}: {msg}")


# --------------------------------------------------------------------------
# config parsing
# --------------------------------------------------------------------------


class _Locator:
    """Maps (table, index, key) back to a source line for error messages."""

    _HEADER = re.compile(r"^\s*(\[\[?)\s*([A-Za-z0-9_.\-]+)\s*\]\]?")
    _KEY = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")

    def __init__(self, text: str):
        self.sections: list[tuple[str, int, int]] = []  # (table, occurrence, header line)
        self.keys: dict[tuple[str, int], dict[str, int]] = {("", 0): {}}
        counts: dict[str, int] = {}
        current = ("", 0)
        for lineno, line in enumerate(text.splitlines(), start=1):
            h = self._HEADER.match(line)
            if h:
                name = h.group(2)
                occ = counts.get(name, 0)
                counts[name] = occ + 1
                current = (name, occ)
                self.sections.append((name, occ, lineno))
                self.keys.setdefault(current, {})
                continue
            k = self._KEY.match(line)
            if k:
                self.keys[current].setdefault(k.group(1), lineno)

    def line(self, table: str = "", index: int = 0, key: Optional[str] = None) -> Optional[int]:
        keys = self.keys.get((table, index))
        if keys is not None and key in keys:
            return keys[key]
        for name, occ, lineno in self.sections:
            if name == table and occ == index:
                return lineno
        return None


@dataclass
class DecoderVariant:
    policy: str = "none"
    placement: str = "single-round"
    osd: bool = True
    quant: Optional[FixedPointFormat] = None
    skip_iters: int = 4
    max_iter: Optional[int] = None
    scaling: Optional[float] = None
    sector: str = "X"


@dataclass
class ExperimentSpec:
    codes: list[CodeSpec]
    p_values: list[float]
    decoders: list[DecoderVariant]
    seed: int = 0
    min_failures: int = 100
    max_trials: int = 1_000_000
    batch_size: int = 4096
    workers: int = 1
    out: str = "results"
    p_meas: Optional[float] = None
    rounds: Any = 1
    mode: str = "static-data"
    source: str = ""
    extra: dict = field(default_factory=dict)

    def grid(self) -> list[RunConfig]:
        """Every RunConfig of the sweep, code-major then p then decoder."""
        out = []
        for code in self.codes:
            for p in self.p_values:
                for dec in self.decoders:
                    rounds = code.d if self.rounds == "d" else int(self.rounds)
                    if rounds is None:
                        raise ValueError(f"rounds = 'd' needs a code distance for {code.label}")
                    bp_kw = dict(policy=dec.policy, skip_iters=dec.skip_iters, quant=dec.quant, scaling=dec.scaling)
                    if dec.max_iter is not None:
                        bp_kw["max_iter"] = dec.max_iter
                    out.append(
                        RunConfig(
                            code=code,
                            noise=NoiseModel(p, self.p_meas, rounds, self.mode),
                            bp=BpConfig.for_distance(code.d, **bp_kw),
                            sector=dec.sector,
                            placement=dec.placement,
                            osd=dec.osd,
                            min_failures=self.min_failures,
                            max_trials=self.max_trials,
                            master_seed=self.seed,
                            batch_size=self.batch_size,
                        )
                    )
        return out


def _as_list(v) -> list:
    return list(v) if isinstance(v, (list, tuple)) else [v]


def parse_experiment(text: str, source: str = "<config>") -> ExperimentSpec:
    """Parse and validate a sweep config; errors carry the offending line."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        if m:
            line = int(m.group(1))
        else:
            line = max(1, len(text.splitlines())) if "end of document" in str(exc) else None
        raise ConfigError(source, line, f"invalid TOML: {exc}") from None
    loc = _Locator(text)

    def fail(msg, table="", index=0, key=None):
        raise ConfigError(source, loc.line(table, index, key), msg)

    known_top = {"seed", "min_failures", "max_trials", "batch_size", "workers", "out", "p", "noise", "codes", "decoders"}
    for key in data:
        if key not in known_top:
            fail(f"unknown key {key!r}", key=key)

    def typed(value, kind, what, table="", index=0, key=None):
        if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
            fail(f"{what} must be an integer, got {value!r}", table, index, key)
        if kind is float and (isinstance(value, bool) or not isinstance(value, (int, float))):
            fail(f"{what} must be a number, got {value!r}", table, index, key)
        return value

    spec_kw: dict = {}
    for key in ("seed", "min_failures", "max_trials", "batch_size", "workers"):
        if key in data:
            spec_kw[key] = typed(data[key], int, key, key=key)
    if "out" in data:
        spec_kw["out"] = str(data["out"])

    p_values = []
    for v in _as_list(data.get("p", [])):
        v = typed(v, float, "p", key="p")
        if not 0.0 <= v <= 1.0:
            fail(f"p values must lie in [0, 1], got {v}", key="p")
        p_values.append(float(v))

    noise = data.get("noise", {})
    if not isinstance(noise, dict):
        fail("noise must be a table", key="noise")
    for key in noise:
        if key not in ("p_meas", "rounds", "mode"):
            fail(f"unknown noise key {key!r}", "noise", 0, key)
    if "p_meas" in noise:
        pm = typed(noise["p_meas"], float, "p_meas", "noise", 0, "p_meas")
        if not 0.0 <= pm <= 1.0:
            fail(f"p_meas must lie in [0, 1], got {pm}", "noise", 0, "p_meas")
        spec_kw["p_meas"] = float(pm)
    if "rounds" in noise:
        r = noise["rounds"]
        if r != "d" and (isinstance(r, bool) or not isinstance(r, int) or r < 1):
            fail(f"rounds must be a positive integer or \"d\", got {r!r}", "noise", 0, "rounds")
        spec_kw["rounds"] = r
    if "mode" in noise:
        if noise["mode"] not in MODES:
            fail(f"unknown noise mode {noise['mode']!r}; expected one of {MODES}", "noise", 0, "mode")
        spec_kw["mode"] = noise["mode"]

    codes = []
    for i, tbl in enumerate(data.get("codes", [])):
        if not isinstance(tbl, dict):
            fail("codes must be an array of tables ([[codes]])", key="codes")
        for key in tbl:
            if key not in ("family", "d", "preset", "path", "format"):
                fail(f"unknown code key {key!r}", "codes", i, key)
        family = tbl.get("family")
        if family is None:
            fail("code table needs a family", "codes", i)
        ds = _as_list(tbl.get("d", [None]))
        for d in ds:
            if d is not None:
                typed(d, int, "d", "codes", i, "d")
            try:
                codes.append(CodeSpec(family, d, tbl.get("preset"), tbl.get("path"), tbl.get("format", "alist")))
            except ValueError as exc:
                fail(str(exc), "codes", i, "family")
            if family == "bb" and tbl.get("preset") not in bb_presets():
                fail(f"unknown BB preset {tbl.get('preset')!r}; available: {sorted(bb_presets())}", "codes", i, "preset")

    decoders = []
    for i, tbl in enumerate(data.get("decoders", [])):
        if not isinstance(tbl, dict):
            fail("decoders must be an array of tables ([[decoders]])", key="decoders")
        kw: dict = {}
        for key, value in tbl.items():
            if key == "policy":
                if value not in POLICIES:
                    fail(f"unknown policy {value!r}; expected one of {POLICIES}", "decoders", i, key)
                kw[key] = value
            elif key == "placement":
                if value not in PLACEMENTS:
                    fail(f"unknown placement {value!r}; expected one of {PLACEMENTS}", "decoders", i, key)
                kw[key] = value
            elif key == "osd":
                if not isinstance(value, bool):
                    fail(f"osd must be true or false, got {value!r}", "decoders", i, key)
                kw[key] = value
            elif key == "quant":
                if value in ("float", "none", None):
                    continue
                try:
                    kw[key] = FixedPointFormat.parse(str(value))
                except ValueError as exc:
                    fail(str(exc), "decoders", i, key)
            elif key in ("skip_iters", "max_iter"):
                v = typed(value, int, key, "decoders", i, key)
                if v < (1 if key == "max_iter" else 0):
                    fail(f"{key} out of range: {v}", "decoders", i, key)
                kw[key] = v
            elif key == "scaling":
                v = typed(value, float, key, "decoders", i, key)
                if not 0.0 < v <= 1.0:
                    fail(f"scaling must lie in (0, 1], got {v}", "decoders", i, key)
                kw[key] = float(v)
            elif key == "sector":
                if value not in ("X", "Z"):
                    fail(f"sector must be \"X\" or \"Z\", got {value!r}", "decoders", i, key)
                kw[key] = value
            else:
                fail(f"unknown decoder key {key!r}", "decoders", i, key)
        decoders.append(DecoderVariant(**kw))

    spec = ExperimentSpec(codes=codes, p_values=p_values, decoders=decoders, source=source, **spec_kw)
    if spec.min_failures < 1:
        fail("min_failures must be >= 1", key="min_failures")
    if spec.max_trials < spec.min_failures:
        fail("max_trials must be >= min_failures", key="max_trials")
    if spec.batch_size < 1:
        fail("batch_size must be >= 1", key="batch_size")
    if spec.workers < 1:
        fail("workers must be >= 1", key="workers")
    if not 0 <= spec.seed < 2**64:
        fail("seed must be an unsigned 64-bit integer", key="seed")
    if spec.rounds == "d":
        for i, c in enumerate(codes):
            if c.d is None:
                fail(f"rounds = \"d\" but code {c.label} has no distance", "noise", 0, "rounds")
    return spec


def load_experiment(path) -> ExperimentSpec:
    path = Path(path)
    return parse_experiment(path.read_text(), str(path))


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def csv_row(report: MetricsReport) -> dict:
    c = report.config
    lo, hi = report.ler_ci
    code = c["code"]
    return {
        "family": code.get("preset") if code["family"] == "bb" else code["family"],
        "d": "" if code.get("d") is None else code["d"],
        "p": repr(float(c["noise"]["p_data"])),
        "policy": c["bp"]["policy"],
        "placement": c["placement"],
        "quant": c["bp"]["quant"] or "float",
        "trials": report.trials,
        "failures": report.failures,
        "ler": repr(report.logical_error_rate),
        "ler_ci_low": repr(lo),
        "ler_ci_high": repr(hi),
        "invoke_rate": repr(report.osd_invoke_rate),
        "mean_iters": repr(report.mean_iterations),
        "max_iter_frac": repr(report.max_iter_fraction),
        "seed": report.master_seed,
        "upper_bound_only": int(report.upper_bound_only),
    }


def format_csv(reports: list[MetricsReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(csv_row(r))
    return buf.getvalue()


def write_report(report: MetricsReport, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{config_hash(report.config)}.json"
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def read_reports(path) -> list[MetricsReport]:
    path = Path(path)
    if (path / "reports").is_dir():
        path = path / "reports"
    files = sorted(path.glob("*.json"))
    return [MetricsReport.from_dict(json.loads(f.read_text())) for f in files]


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    try:
        spec = load_experiment(args.config)
        if args.seed is not None:
            spec.seed = args.seed
        for key in ("min_failures", "max_trials", "workers"):
            if getattr(args, key) is not None:
                setattr(spec, key, getattr(args, key))
        grid = spec.grid()
    except (ConfigError, ValueError, CodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out or spec.out)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    reports = []
    built: dict = {}
    for k, cfg in enumerate(grid):
        try:
            code = built.get(cfg.code) or cfg.code.build()
        except (CodeError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        built[cfg.code] = code
        rep = run_trials(cfg, spec.workers, code=code)
        write_report(rep, out / "reports")
        reports.append(rep)
        if not args.quiet:
            print(
                f"[{k + 1}/{len(grid)}] {cfg.code.label} p={cfg.noise.p_data} {cfg.bp.policy}/{cfg.placement}"
                f" trials={rep.trials} failures={rep.failures} ler={rep.logical_error_rate:.3e}"
                + (" (upper bound only)" if rep.upper_bound_only else ""),
                file=sys.stderr,
            )
    (out / "summary.csv").write_text(format_csv(reports))
    return 0


def _load_cli_code(args):
    """Returns (label, h_x, h_z, family, d) without enforcing CSS validity."""
    if args.file:
        h_x, h_z = read_matrix_pair(args.file, args.format)
        return str(args.file), h_x, h_z, None, args.d
    if args.preset:
        code = load_bb_preset(args.preset)
        return args.preset, code.h_x, code.h_z, "bb", code.d
    if args.code in ("surface", "toric"):
        if args.d is None:
            raise CodeError(f"--code {args.code} needs --d")
        code = build_surface_code(args.d) if args.code == "surface" else build_toric_code(args.d)
        return code.name, code.h_x, code.h_z, args.code, args.d
    raise CodeError("select a code with --code/--d, --preset or --file")


def cmd_validate(args) -> int:
    try:
        label, h_x, h_z, family, d = _load_cli_code(args)
    except (CodeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    results: list[tuple[str, bool, str]] = []
    n = h_x.shape[1]
    if h_z.shape[1] != n:
        results.append(("qubit count", False, f"h_x has {n} columns, h_z has {h_z.shape[1]}"))
    else:
        bad = commutation_violations(h_x, h_z)
        if bad:
            row, cols = bad[0]
            results.append(("CSS commutation", False, f"h_x row {row} anticommutes with h_z rows {cols}"))
        else:
            results.append(("CSS commutation", True, "h_x . h_z^T = 0"))
        rx, rz = gf2_rank(h_x), gf2_rank(h_z)
        k = n - rx - rz
        if not bad:
            lx, lz = compute_logicals(h_x, h_z)
            ok = lx.shape[0] == k and lz.shape[0] == k
            results.append(("rank/k consistency", ok, f"n={n} rank(h_x)={rx} rank(h_z)={rz} k={k} logicals={lx.shape[0]}"))
            if k > 0:
                pairing = gf2_rank(gf2_matmul(lx, lz.T))
                indep = gf2_rank(np.vstack([h_x, lx])) == rx + k and gf2_rank(np.vstack([h_z, lz])) == rz + k
                ok = pairing == k and indep
                results.append(("logical independence", ok, f"rank(L_x L_z^T)={pairing}, independent of stabilizers: {indep}"))
        if family in ("surface", "toric") and not bad:
            from .codes import make_css_code

            code = make_css_code(h_x, h_z, name=label, d=d)
            rel = table_relabeling(code, family)
            ok = all(v is not None for v in rel.values())
            detail = ", ".join(f"{k}->{v[0] if v else 'none'}" for k, v in rel.items())
            results.append(("index-table bijection", ok, detail))
    failed = False
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed |= not ok
    return 1 if failed else 0


def cmd_code_info(args) -> int:
    try:
        label, h_x, h_z, _, d = _load_cli_code(args)
    except (CodeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    n = h_x.shape[1]
    rx, rz = gf2_rank(h_x), gf2_rank(h_z)
    print(f"code {label}")
    print(f"n {n}")
    print(f"k {n - rx - rz}")
    print(f"d {d if d is not None else 'unknown'}")
    for name, H, r in (("h_x", h_x, rx), ("h_z", h_z, rz)):
        g = TannerGraph.from_matrix(H)
        cn = dict(zip(*np.unique(g.cn_degrees(), return_counts=True)))
        vn = dict(zip(*np.unique(g.vn_degrees(), return_counts=True)))
        fmt = lambda h: " ".join(f"{int(k)}:{int(v)}" for k, v in sorted(h.items()))  # noqa: E731
        print(f"{name} rows {H.shape[0]} rank {r} check-degrees {fmt(cn)} qubit-degrees {fmt(vn)}")
    return 0


def _series_key(c: dict) -> str:
    code = c["code"]
    label = code.get("preset") or (f"{code['family']}_d{code['d']}" if code.get("d") is not None else Path(code.get("path", "code")).stem)
    quant = c["bp"]["quant"] or "float"
    osd = "osd" if c["osd"] else "noosd"
    return f"{label}__{c['bp']['policy']}__{c['placement']}__{quant}__{osd}"


def plot_series(reports: list[MetricsReport], figure: str) -> dict[str, list[tuple]]:
    """Series name -> rows for one figure key."""
    if figure not in FIGURES:
        raise ValueError(f"unknown figure {figure!r}; valid keys: {', '.join(FIGURES)}")
    series: dict[str, list[tuple]] = {}
    if figure in ("ler-vs-p", "invoke-vs-p"):
        for r in reports:
            key = _series_key(r.config)
            val = r.logical_error_rate if figure == "ler-vs-p" else r.osd_invoke_rate
            series.setdefault(key, []).append((r.config["noise"]["p_data"], val))
        for rows in series.values():
            rows.sort()
        return series
    for r in reports:
        key = f"{_series_key(r.config)}__p{r.config['noise']['p_data']!r}"
        hist = r.iteration_histogram if figure == "iter-hist" else r.vote_stabilization_histogram
        series[key] = sorted(hist.items())
    return series


def cmd_plotdata(args) -> int:
    if args.figure not in FIGURES:
        print(f"error: unknown figure {args.figure!r}; valid keys: {', '.join(FIGURES)}", file=sys.stderr)
        return 2
    reports = read_reports(args.reports)
    if not reports:
        print(f"error: no reports found under {args.reports}", file=sys.stderr)
        return 2
    out = Path(args.out or Path(args.reports) / "plot-data")
    out.mkdir(parents=True, exist_ok=True)
    header = {
        "ler-vs-p": "# p logical_error_rate",
        "invoke-vs-p": "# p osd_invoke_rate",
        "iter-hist": "# iteration count",
        "vote-round-hist": "# stabilization_round count",
    }[args.figure]
    for name, rows in plot_series(reports, args.figure).items():
        lines = [header] + [" ".join(repr(x) for x in row) for row in rows]
        (out / f"{args.figure}__{name}.dat").write_text("\n".join(lines) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lotterybp", description="Lottery BP + OSD decoding simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a sweep described by a TOML config")
    sim.add_argument("--config", required=True)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--workers", type=int)
    sim.add_argument("--out")
    sim.add_argument("--min-failures", dest="min_failures", type=int)
    sim.add_argument("--max-trials", dest="max_trials", type=int)
    sim.add_argument("--quiet", action="store_true")
    sim.set_defaults(func=cmd_simulate)

    for name, func, text in (
        ("validate", cmd_validate, "check code invariants"),
        ("code-info", cmd_code_info, "print n, k, ranks and degrees"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--code", choices=("surface", "toric"))
        p.add_argument("--d", type=int)
        p.add_argument("--preset", choices=sorted(bb_presets()))
        p.add_argument("--file")
        p.add_argument("--format", default="alist", choices=("alist", "dense", "dense-text"))
        p.set_defaults(func=func)

    pd = sub.add_parser("plot-data", help="emit whitespace-separated series from reports")
    pd.add_argument("--reports", required=True)
    pd.add_argument("--figure", required=True, choices=FIGURES)
    pd.add_argument("--out")
    pd.set_defaults(func=cmd_plotdata)
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
