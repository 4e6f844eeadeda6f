"""CSS code construction, file I/O and Tanner-graph adjacency.

Qubit numbering for the planar surface code (distance d)::

    horizontal edges   0 .. d*d-1            row-major, d per row, d rows
    vertical edges     d*d .. 2d^2-2d         row-major, d-1 per row, d-1 rows

``h_x`` holds the vertex checks (d rows of d-1 interior vertices) and
``h_z`` the face checks (d-1 rows of d faces). For the toric code the
horizontal edge H(r, j) = r*d + j and vertical edge V(r, j) = d*d + r*d + j;
``h_x`` row r*d + j is the star {H(r,j), H(r,j+1), V(r-1,j), V(r,j)} and
``h_z`` row r*d + j is the plaquette {H(r,j), H(r+1,j), V(r,j-1), V(r,j)}
(indices mod d).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .gf2 import (
    as_binary_matrix,
    gf2_kernel,
    gf2_matmul,
    gf2_rank,
)


class CodeError(ValueError):
    """Invalid code parameters or a malformed / inconsistent code file."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.uint8)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class CssCode:
    name: str
    n: int
    k: int
    d: Optional[int]
    h_x: np.ndarray
    h_z: np.ndarray
    logicals_x: np.ndarray
    logicals_z: np.ndarray

    def check_matrix(self, sector: str) -> np.ndarray:
        """Parity-check matrix the decoder runs against for ``sector``."""
        if sector == "X":
            return self.h_x
        if sector == "Z":
            return self.h_z
        raise CodeError(f"unknown sector {sector!r}; expected 'X' or 'Z'")

    def failure_logicals(self, sector: str) -> np.ndarray:
        """Logical operators that detect an uncorrectable residual.

        Residuals of a sector-``X`` decode live in ker(h_x); they are logical
        iff they have odd overlap with some operator in ker(h_z) \\ rowspace(h_x),
        i.e. with ``logicals_x``.
        """
        if sector == "X":
            return self.logicals_x
        if sector == "Z":
            return self.logicals_z
        raise CodeError(f"unknown sector {sector!r}; expected 'X' or 'Z'")

    def stabilizers(self, sector: str) -> np.ndarray:
        """Checks whose products are harmless residuals for ``sector``."""
        return self.h_z if sector == "X" else self.h_x


@dataclass(frozen=True)
class TannerGraph:
    """Bipartite adjacency of a parity-check matrix plus flat edge arrays.

    Edges are numbered check-major: edge ``e`` runs between check
    ``edge_cn[e]`` and variable ``edge_vn[e]``; the edges of check ``c`` are
    ``cn_ptr[c]:cn_ptr[c+1]`` and those of variable ``v`` are
    ``vn_edges[vn_ptr[v]:vn_ptr[v+1]]``.
    """

    m: int
    n: int
    cn_neighbors: tuple
    vn_neighbors: tuple
    cn_ptr: np.ndarray = field(repr=False)
    edge_vn: np.ndarray = field(repr=False)
    edge_cn: np.ndarray = field(repr=False)
    vn_ptr: np.ndarray = field(repr=False)
    vn_edges: np.ndarray = field(repr=False)

    @classmethod
    def from_matrix(cls, H) -> "TannerGraph":
        H = as_binary_matrix(H)
        m, n = H.shape
        rows, cols = np.nonzero(H)
        cn_ptr = np.zeros(m + 1, dtype=np.int64)
        np.add.at(cn_ptr, rows + 1, 1)
        cn_ptr = np.cumsum(cn_ptr)
        edge_vn = cols.astype(np.int64)
        edge_cn = rows.astype(np.int64)
        order = np.lexsort((edge_cn, edge_vn))
        vn_ptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(vn_ptr, edge_vn + 1, 1)
        vn_ptr = np.cumsum(vn_ptr)
        cn_neighbors = tuple(tuple(int(v) for v in edge_vn[cn_ptr[c] : cn_ptr[c + 1]]) for c in range(m))
        vn_neighbors = tuple(tuple(int(edge_cn[e]) for e in order[vn_ptr[v] : vn_ptr[v + 1]]) for v in range(n))
        arrays = [_freeze_i(a) for a in (cn_ptr, edge_vn, edge_cn, vn_ptr, order.astype(np.int64))]
        return cls(m, n, cn_neighbors, vn_neighbors, *arrays)

    @property
    def num_edges(self) -> int:
        return int(self.edge_vn.shape[0])

    def cn_degrees(self) -> np.ndarray:
        return np.diff(self.cn_ptr)

    def vn_degrees(self) -> np.ndarray:
        return np.diff(self.vn_ptr)


def _freeze_i(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.int64)
    a.flags.writeable = False
    return a


# --------------------------------------------------------------------------
# logical operators
# --------------------------------------------------------------------------


def _coset_representatives(kernel_of: np.ndarray, modulo: np.ndarray) -> np.ndarray:
    n = kernel_of.shape[1]
    span = modulo.copy()
    rank = gf2_rank(span)
    reps = []
    for v in gf2_kernel(kernel_of):
        trial = np.vstack([span, v])
        r = gf2_rank(trial)
        if r > rank:
            reps.append(v)
            span, rank = trial, r
    if not reps:
        return np.zeros((0, n), dtype=np.uint8)
    return np.array(reps, dtype=np.uint8)


def compute_logicals(h_x, h_z) -> tuple[np.ndarray, np.ndarray]:
    """Independent X and Z logical operators of a CSS code.

    X-logicals span ker(h_z) modulo rowspace(h_x); Z-logicals span ker(h_x)
    modulo rowspace(h_z).
    """
    h_x = as_binary_matrix(h_x)
    h_z = as_binary_matrix(h_z)
    if gf2_matmul(h_x, h_z.T).any():
        raise CodeError("h_x and h_z do not commute")
    return _coset_representatives(h_z, h_x), _coset_representatives(h_x, h_z)


def commutation_violations(h_x, h_z) -> list[tuple[int, list[int]]]:
    """(h_x row, [h_z rows]) pairs with odd overlap."""
    prod = gf2_matmul(as_binary_matrix(h_x), as_binary_matrix(h_z).T)
    return [(int(r), np.nonzero(prod[r])[0].tolist()) for r in np.nonzero(prod.any(axis=1))[0]]


def make_css_code(h_x, h_z, *, name: str = "css", d: Optional[int] = None) -> CssCode:
    h_x = as_binary_matrix(h_x)
    h_z = as_binary_matrix(h_z)
    if h_x.shape[1] != h_z.shape[1]:
        raise CodeError(f"dimension mismatch: h_x has {h_x.shape[1]} columns, h_z has {h_z.shape[1]}")
    bad = commutation_violations(h_x, h_z)
    if bad:
        row, partners = bad[0]
        raise CodeError(f"CSS commutation violated: row {row} of h_x has odd overlap with h_z rows {partners}")
    n = h_x.shape[1]
    k = n - gf2_rank(h_x) - gf2_rank(h_z)
    lx, lz = compute_logicals(h_x, h_z)
    return CssCode(
        name=name,
        n=n,
        k=k,
        d=d,
        h_x=_freeze(h_x),
        h_z=_freeze(h_z),
        logicals_x=_freeze(lx),
        logicals_z=_freeze(lz),
    )


# --------------------------------------------------------------------------
# builders
# --------------------------------------------------------------------------


def build_surface_code(d: int) -> CssCode:
    """Unrotated planar surface code [[d^2 + (d-1)^2, 1, d]]."""
    if not isinstance(d, (int, np.integer)) or d < 3 or d % 2 == 0:
        raise CodeError(f"surface code distance must be an odd integer >= 3, got {d!r}")
    n = d * d + (d - 1) * (d - 1)
    m = d * (d - 1)
    vert = d * d
    h_x = np.zeros((m, n), dtype=np.uint8)
    for r in range(d):
        for j in range(d - 1):
            i = r * (d - 1) + j
            h_x[i, r * d + j] = 1
            h_x[i, r * d + j + 1] = 1
            if r > 0:
                h_x[i, vert + (r - 1) * (d - 1) + j] = 1
            if r < d - 1:
                h_x[i, vert + r * (d - 1) + j] = 1
    h_z = np.zeros((m, n), dtype=np.uint8)
    for r in range(d - 1):
        for j in range(d):
            i = r * d + j
            h_z[i, r * d + j] = 1
            h_z[i, (r + 1) * d + j] = 1
            if j > 0:
                h_z[i, vert + r * (d - 1) + j - 1] = 1
            if j < d - 1:
                h_z[i, vert + r * (d - 1) + j] = 1
    return make_css_code(h_x, h_z, name=f"surface_d{d}", d=int(d))


def build_toric_code(d: int) -> CssCode:
    """Toric code [[2 d^2, 2, d]] on a periodic d x d lattice."""
    if not isinstance(d, (int, np.integer)) or d < 2:
        raise CodeError(f"toric code distance must be an integer >= 2, got {d!r}")
    n = 2 * d * d

    def hz(r, j):
        return (r % d) * d + (j % d)

    def vt(r, j):
        return d * d + (r % d) * d + (j % d)

    h_x = np.zeros((d * d, n), dtype=np.uint8)
    h_z = np.zeros((d * d, n), dtype=np.uint8)
    for r in range(d):
        for j in range(d):
            i = r * d + j
            for q in (hz(r, j), hz(r, j + 1), vt(r - 1, j), vt(r, j)):
                h_x[i, q] ^= 1
            for q in (hz(r, j), hz(r + 1, j), vt(r, j - 1), vt(r, j)):
                h_z[i, q] ^= 1
    return make_css_code(h_x, h_z, name=f"toric_d{d}", d=int(d))


def _shift(size: int, power: int) -> np.ndarray:
    return np.roll(np.eye(size, dtype=np.uint8), power, axis=1)


def _bivariate(l: int, m: int, terms: Sequence[Sequence[int]]) -> np.ndarray:
    M = np.zeros((l * m, l * m), dtype=np.uint8)
    for a, b in terms:
        M ^= np.kron(_shift(l, a), _shift(m, b))
    return M


def build_bb_code(
    l: int,
    m: int,
    a_terms: Sequence[Sequence[int]],
    b_terms: Sequence[Sequence[int]],
    *,
    d: Optional[int] = None,
    name: Optional[str] = None,
) -> CssCode:
    """Bivariate bicycle code with h_x = [A | B] and h_z = [B^T | A^T].

    ``A`` and ``B`` are sums of x^a y^b with x = S_l (x) I_m and
    y = I_l (x) S_m, S_k the k x k cyclic shift. ``d`` is caller metadata.
    """
    if l < 1 or m < 1:
        raise CodeError(f"l and m must be >= 1, got l={l}, m={m}")
    if not a_terms or not b_terms:
        raise CodeError("a_terms and b_terms must be nonempty")
    for a, b in list(a_terms) + list(b_terms):
        if not (0 <= a < l and 0 <= b < m):
            raise CodeError(f"exponent pair ({a}, {b}) outside [0, {l}) x [0, {m})")
    A = _bivariate(l, m, a_terms)
    B = _bivariate(l, m, b_terms)
    h_x = np.hstack([A, B])
    h_z = np.hstack([B.T, A.T])
    return make_css_code(h_x, h_z, name=name or f"bb_{l}x{m}", d=d)


def bb_presets() -> dict:
    with resources.files("lotterybp.data").joinpath("bb_presets.json").open() as fh:
        return json.load(fh)


def load_bb_preset(key: str) -> CssCode:
    presets = bb_presets()
    if key not in presets:
        raise CodeError(f"unknown BB preset {key!r}; available: {sorted(presets)}")
    p = presets[key]
    return build_bb_code(p["l"], p["m"], p["a_terms"], p["b_terms"], d=p.get("d"), name=key)


# --------------------------------------------------------------------------
# file formats
# --------------------------------------------------------------------------


def _content_lines(text: str) -> list[tuple[int, str]]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append((lineno, line))
    return out


def _ints(lineno: int, line: str) -> list[int]:
    try:
        return [int(t) for t in line.split()]
    except ValueError:
        raise CodeError(f"line {lineno}: expected integers, got {line!r}") from None


def _parse_alist(lines: list[tuple[int, str]], pos: int) -> tuple[np.ndarray, int]:
    def take():
        nonlocal pos
        if pos >= len(lines):
            raise CodeError("unexpected end of alist data")
        lineno, line = lines[pos]
        pos += 1
        return lineno, _ints(lineno, line)

    lineno, hdr = take()
    if len(hdr) != 2 or min(hdr) < 1:
        raise CodeError(f"line {lineno}: alist header must be 'n m' with positive values")
    n, m = hdr
    lineno, maxdeg = take()
    if len(maxdeg) != 2:
        raise CodeError(f"line {lineno}: expected max column / row degrees")
    lineno, col_deg = take()
    if len(col_deg) != n:
        raise CodeError(f"line {lineno}: expected {n} column degrees, got {len(col_deg)}")
    lineno, row_deg = take()
    if len(row_deg) != m:
        raise CodeError(f"line {lineno}: expected {m} row degrees, got {len(row_deg)}")
    H = np.zeros((m, n), dtype=np.uint8)
    for c in range(n):
        lineno, idx = take()
        idx = [i for i in idx if i != 0]
        if len(idx) != col_deg[c]:
            raise CodeError(f"line {lineno}: column {c} lists {len(idx)} entries, degree says {col_deg[c]}")
        for i in idx:
            if not 1 <= i <= m:
                raise CodeError(f"line {lineno}: row index {i} out of range 1..{m}")
            H[i - 1, c] = 1
    for r in range(m):
        lineno, idx = take()
        idx = sorted(i for i in idx if i != 0)
        if len(idx) != row_deg[r]:
            raise CodeError(f"line {lineno}: row {r} lists {len(idx)} entries, degree says {row_deg[r]}")
        if any(not 1 <= i <= n for i in idx):
            raise CodeError(f"line {lineno}: column index out of range 1..{n} in row {r}")
        if idx != (np.nonzero(H[r])[0] + 1).tolist():
            raise CodeError(f"line {lineno}: row {r} disagrees with the column lists")
    return H, pos


def _parse_dense(lines: list[tuple[int, str]], pos: int) -> tuple[np.ndarray, int]:
    if pos >= len(lines):
        raise CodeError("unexpected end of dense-text data")
    lineno, line = lines[pos]
    hdr = _ints(lineno, line)
    if len(hdr) != 2 or min(hdr) < 1:
        raise CodeError(f"line {lineno}: dense header must be 'n m' with positive values")
    n, m = hdr
    pos += 1
    H = np.zeros((m, n), dtype=np.uint8)
    for r in range(m):
        if pos >= len(lines):
            raise CodeError(f"unexpected end of data: expected {m} rows, got {r}")
        lineno, line = lines[pos]
        bits = _ints(lineno, line)
        if len(bits) != n or any(b not in (0, 1) for b in bits):
            raise CodeError(f"line {lineno}: row {r} must have {n} entries in {{0,1}}")
        H[r] = bits
        pos += 1
    return H, pos


_PARSERS = {"alist": _parse_alist, "dense": _parse_dense, "dense-text": _parse_dense}


def _parser(fmt: str):
    try:
        return _PARSERS[fmt]
    except KeyError:
        raise CodeError(f"unknown code format {fmt!r}; expected 'alist' or 'dense'") from None


def read_matrix(path, fmt: str = "alist") -> np.ndarray:
    """Read a single parity-check matrix."""
    lines = _content_lines(Path(path).read_text())
    H, pos = _parser(fmt)(lines, 0)
    if pos != len(lines):
        raise CodeError(f"line {lines[pos][0]}: trailing data after matrix")
    return H


def read_matrix_pair(path, fmt: str = "alist") -> tuple[np.ndarray, np.ndarray]:
    lines = _content_lines(Path(path).read_text())
    parse = _parser(fmt)
    h_x, pos = parse(lines, 0)
    h_z, pos = parse(lines, pos)
    if pos != len(lines):
        raise CodeError(f"line {lines[pos][0]}: trailing data after h_z")
    if h_x.shape[1] != h_z.shape[1]:
        raise CodeError(f"dimension mismatch: h_x has {h_x.shape[1]} columns, h_z has {h_z.shape[1]}")
    return h_x, h_z


def format_alist(H) -> str:
    H = as_binary_matrix(H)
    m, n = H.shape
    cols = [np.nonzero(H[:, c])[0] + 1 for c in range(n)]
    rows = [np.nonzero(H[r])[0] + 1 for r in range(m)]
    maxc = max((len(c) for c in cols), default=0)
    maxr = max((len(r) for r in rows), default=0)

    def pad(idx, width):
        vals = list(idx) + [0] * (width - len(idx))
        return " ".join(str(int(v)) for v in vals)

    out = [f"{n} {m}", f"{maxc} {maxr}", " ".join(str(len(c)) for c in cols), " ".join(str(len(r)) for r in rows)]
    out += [pad(c, maxc) for c in cols]
    out += [pad(r, maxr) for r in rows]
    return "\n".join(out) + "\n"


def format_dense(H) -> str:
    H = as_binary_matrix(H)
    m, n = H.shape
    return f"{n} {m}\n" + "".join(" ".join(str(int(b)) for b in row) + "\n" for row in H)


def write_matrix(H, path, fmt: str = "alist") -> None:
    _parser(fmt)
    Path(path).write_text(format_alist(H) if fmt == "alist" else format_dense(H))


def save_code(code: CssCode, path, fmt: str = "alist") -> None:
    """Write h_x followed by h_z in one file."""
    _parser(fmt)
    fmt_one = format_alist if fmt == "alist" else format_dense
    Path(path).write_text(f"# {code.name}: h_x\n" + fmt_one(code.h_x) + "# h_z\n" + fmt_one(code.h_z))


def load_code(path, fmt: str = "alist", *, d: Optional[int] = None, name: Optional[str] = None) -> CssCode:
    """Load a CSS code stored as two consecutive matrix blocks (h_x, then h_z)."""
    h_x, h_z = read_matrix_pair(path, fmt)
    return make_css_code(h_x, h_z, name=name or Path(path).stem, d=d)


# --------------------------------------------------------------------------
# closed-form CN -> VN index tables
# --------------------------------------------------------------------------


def num_checks(family: str, d: int) -> int:
    if family == "surface":
        return d * (d - 1)
    if family == "toric":
        return d * d
    raise CodeError(f"index table defined only for 'surface' and 'toric', got {family!r}")


def cn_to_vn_indices(family: str, check: str, d: int, i: int, *, corrected: bool = True) -> list[Optional[int]]:
    """Indices of the (up to) four variable nodes attached to check ``i``.

    Evaluates the closed-form hardware routing table; ``None`` marks an empty
    slot (boundary checks of degree < 4). The table's ``X`` rows describe our
    ``h_z`` and its ``Z`` rows our ``h_x`` (see :func:`table_relabeling`).

    With ``corrected=False`` the expressions are evaluated exactly as
    tabulated. Three branches are wrong as tabulated, and ``corrected=True``
    (the default) replaces them:

    * surface Z: VN0/VN1 use floor(i/(d-1)) instead of floor((i+1)/d); VN2
      is empty for i < d-1 (not i < d); VN3 is empty for i >= (d-1)^2.
    * toric X: VN1 wraps for i >= d(d-1) (not i > d(d-1)); VN2 wraps for
      i mod d == 0 (not i mod d == 1).
    """
    if check not in ("X", "Z"):
        raise CodeError(f"check must be 'X' or 'Z', got {check!r}")
    m = num_checks(family, d)
    if not 0 <= i < m:
        raise CodeError(f"check index {i} out of range [0, {m}) for {family} d={d}")
    dd = d * d
    if family == "surface" and check == "X":
        return [
            i,
            i + d,
            None if i % d == 0 else dd + i - 1 - i // d,
            None if i % d == d - 1 else dd + i - i // d,
        ]
    if family == "surface" and check == "Z":
        if not corrected:
            return [
                i + (i + 1) // d,
                i + 1 + (i + 1) // d,
                None if i < d else dd + 1 + i - d,
                dd + i,
            ]
        row = i // (d - 1)
        return [
            i + row,
            i + row + 1,
            None if i < d - 1 else dd + 1 + i - d,
            None if i >= (d - 1) * (d - 1) else dd + i,
        ]
    if family == "toric" and check == "X":
        if not corrected:
            return [
                i,
                i - d * (d - 1) if i > d * (d - 1) else d + i,
                dd + i + d - 1 if i % d == 1 else dd + i - 1,
                dd + i,
            ]
        return [
            i,
            i - d * (d - 1) if i >= d * (d - 1) else d + i,
            dd + i + d - 1 if i % d == 0 else dd + i - 1,
            dd + i,
        ]
    # toric Z
    return [
        i,
        i - d + 1 if i % d == d - 1 else i + 1,
        2 * dd - d + i if i < d else dd + i - d,
        dd + i,
    ]


def _table_rows(family: str, check: str, d: int, corrected: bool) -> list[frozenset]:
    return [
        frozenset(v for v in cn_to_vn_indices(family, check, d, i, corrected=corrected) if v is not None)
        for i in range(num_checks(family, d))
    ]


def _row_bijection(table_rows: list[frozenset], H: np.ndarray) -> Optional[list[int]]:
    """Map table check i -> matrix row, or None if not a bijection."""
    index = {}
    for r in range(H.shape[0]):
        index.setdefault(frozenset(np.nonzero(H[r])[0].tolist()), []).append(r)
    mapping = []
    used = set()
    for rows in table_rows:
        cands = [r for r in index.get(rows, []) if r not in used]
        if not cands:
            return None
        used.add(cands[0])
        mapping.append(cands[0])
    return mapping if len(used) == H.shape[0] else None


def table_relabeling(code: CssCode, family: str, *, corrected: bool = True) -> dict:
    """Discover which constructed matrix each table check label describes.

    Returns ``{"X": (matrix_name, row_map), "Z": (matrix_name, row_map)}``
    where ``row_map[i]`` is the matrix row matching table check ``i``
    (column labels are the identity). Labels with no bijective match map to
    ``None``.
    """
    d = code.d
    out = {}
    for check in ("X", "Z"):
        rows = _table_rows(family, check, d, corrected)
        found = None
        for mat_name in ("h_x", "h_z"):
            H = getattr(code, mat_name)
            if H.shape[0] != len(rows):
                continue
            if any(v >= code.n for r in rows for v in r):
                continue
            mapping = _row_bijection(rows, H)
            if mapping is not None:
                found = (mat_name, mapping)
                break
        out[check] = found
    return out


def table_corrections(family: str, d: int) -> list[tuple[str, int, int, Optional[int], Optional[int]]]:
    """(check, i, slot, tabulated, corrected) for every slot the corrections change."""
    diffs = []
    for check in ("X", "Z"):
        for i in range(num_checks(family, d)):
            raw = cn_to_vn_indices(family, check, d, i, corrected=False)
            fixed = cn_to_vn_indices(family, check, d, i, corrected=True)
            for slot, (a, b) in enumerate(zip(raw, fixed)):
                if a != b:
                    diffs.append((check, i, slot, a, b))
    return diffs
