"""Reading and writing interaction, imputation and feature files.

Interaction files follow the MatrixMarket coordinate layout::

    %%MatrixMarket matrix coordinate real general
    % optional comment lines
    m n count
    i j r
    ...

Indices are 1-based on disk and 0-based in memory. The banner and size line
may be omitted together, in which case every non-comment line is an entry
and m, n are the largest indices seen.

Dense matrices (imputation vectors, side features) are whitespace-separated
rows preceded by ``# extremesim-dense v1 <rows> <cols>``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParseError, ValidationError
from .linalg import SparseMatrixDual

log = logging.getLogger(__name__)

MM_BANNER = "%%MatrixMarket matrix coordinate real general"
DENSE_TAG = "extremesim-dense"
DENSE_VERSION = 1


def _parse_int(tok, path, lineno, what):
    try:
        v = int(tok)
    except ValueError:
        raise ParseError(path, lineno, f"{what} {tok!r} is not an integer") from None
    return v


def load_interactions(path, shape=None):
    """Read an interaction file into a ``SparseMatrixDual`` of R values.

    ``shape`` overrides the size taken from the header or inferred from the
    largest indices; entries outside it are rejected.
    """
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    header = None
    expect_header = False
    rows, cols, vals = [], [], []
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if lineno == 1 and line.startswith("%%"):
                if line.split()[:3] != MM_BANNER.split()[:3] or "coordinate" not in line:
                    raise ParseError(path, lineno, "unsupported MatrixMarket banner")
                expect_header = True
                continue
            if not line or line[0] in "%#":
                continue
            toks = line.split()
            if expect_header and header is None:
                if len(toks) != 3:
                    raise ParseError(path, lineno, "size line must read 'm n count'")
                header = tuple(_parse_int(t, path, lineno, "size") for t in toks)
                if min(header) < 0 or header[0] == 0 or header[1] == 0:
                    raise ParseError(path, lineno, "invalid sizes in header")
                continue
            if len(toks) != 3:
                raise ParseError(path, lineno, f"expected 'i j r', got {len(toks)} fields")
            i = _parse_int(toks[0], path, lineno, "row index")
            j = _parse_int(toks[1], path, lineno, "column index")
            try:
                r = float(toks[2])
            except ValueError:
                raise ParseError(path, lineno, f"value {toks[2]!r} is not a number") from None
            if i < 1 or j < 1:
                raise ParseError(path, lineno, "indices are 1-based and must be >= 1")
            if not math.isfinite(r):
                raise ParseError(path, lineno, "value is not finite")
            if header is not None and (i > header[0] or j > header[1]):
                raise ParseError(path, lineno, f"entry ({i}, {j}) outside {header[0]}x{header[1]}")
            rows.append(i - 1)
            cols.append(j - 1)
            vals.append(r)
    if expect_header and header is None:
        raise ParseError(path, 1, "MatrixMarket banner without a size line")
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if header is not None:
        m, n, count = header
        if count != rows.size:
            raise ValidationError(f"{path}: header declares {count} entries, found {rows.size}")
    else:
        m = int(rows.max()) + 1 if rows.size else 0
        n = int(cols.max()) + 1 if cols.size else 0
    if shape is not None:
        if rows.size and (rows.max() >= shape[0] or cols.max() >= shape[1]):
            raise ValidationError(f"{path}: entity index beyond {shape[0]}x{shape[1]}")
        m, n = shape
    if m == 0 or n == 0:
        raise ValidationError(f"{path}: cannot infer matrix size from an empty file without header")
    if rows.size > 1:
        key = rows * n + cols
        uniq, counts = np.unique(key, return_counts=True)
        if np.any(counts > 1):
            dup = int(uniq[np.argmax(counts > 1)])
            raise ValidationError(f"{path}: duplicate pair ({dup // n + 1}, {dup % n + 1})")
    return SparseMatrixDual(rows, cols, vals, (m, n))


def write_interactions(path, observed, comment=None):
    m, n = observed.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(MM_BANNER + "\n")
        if comment:
            for line in str(comment).splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{m} {n} {observed.nnz}\n")
        for i, j, r in zip(observed.rows, observed.cols, observed.values):
            fh.write(f"{i + 1} {j + 1} {r:.17g}\n")


@dataclass
class DatasetBundle:
    train: SparseMatrixDual
    test: SparseMatrixDual

    @property
    def m(self):
        return self.train.shape[0]

    @property
    def n(self):
        return self.train.shape[1]


def load_dataset(train_path, test_path=None):
    """Load a train file and an optional test file over the same index space."""
    train = load_interactions(train_path)
    if test_path is None:
        test = SparseMatrixDual([], [], [], train.shape)
    else:
        test = load_interactions(test_path, shape=train.shape)
    return DatasetBundle(train, test)


def make_split(observed, ratio, seed):
    """Uniform pair-level split into (train, test), deterministic per seed."""
    if not 0.0 < ratio < 1.0:
        raise ValidationError("split ratio must lie strictly between 0 and 1")
    total = observed.nnz
    n_train = int(math.floor(ratio * total + 0.5))
    if n_train == 0 or n_train == total:
        raise ValidationError(f"split of {total} pairs at ratio {ratio} leaves one side empty")
    perm = np.random.default_rng(seed).permutation(total)
    tr, te = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    r, c, v = observed.rows, observed.cols, observed.values
    return (
        SparseMatrixDual(r[tr], c[tr], v[tr], observed.shape),
        SparseMatrixDual(r[te], c[te], v[te], observed.shape),
    )


def write_dense(path, arr):
    arr = np.atleast_2d(np.asarray(arr, dtype=np.float64))
    header = f"{DENSE_TAG} v{DENSE_VERSION} {arr.shape[0]} {arr.shape[1]}"
    np.savetxt(path, arr, fmt="%.17g", header=header)


def read_dense(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            first = fh.readline()
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    toks = first.lstrip("#").split()
    if len(toks) != 4 or toks[0] != DENSE_TAG or toks[1] != f"v{DENSE_VERSION}":
        raise ParseError(path, 1, f"expected '# {DENSE_TAG} v{DENSE_VERSION} rows cols'")
    rows, cols = int(toks[2]), int(toks[3])
    try:
        arr = np.loadtxt(path, dtype=np.float64, comments="#", ndmin=2)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if rows == 0:
        arr = arr.reshape(0, cols)
    if arr.shape != (rows, cols):
        raise ValidationError(f"{path}: header says {rows}x{cols}, data is {arr.shape}")
    return arr


def build_imputation(kind, k, m, n, p_path=None, q_path=None):
    """Imputation matrices (P_tilde, Q_tilde).

    ``kind="constant"`` sets every row to -1/sqrt(k) on the left and
    +1/sqrt(k) on the right, so every imputed label equals -1.
    """
    if k <= 0:
        raise ValidationError("k must be positive")
    if kind == "constant":
        s = 1.0 / math.sqrt(k)
        return np.full((m, k), -s), np.full((n, k), s)
    if kind == "file":
        if p_path is None or q_path is None:
            raise DataError("file imputation needs both matrix paths")
        pt, qt = read_dense(p_path), read_dense(q_path)
        if pt.shape != (m, k) or qt.shape != (n, k):
            raise ValidationError(
                f"imputation shapes {pt.shape}, {qt.shape} do not match ({m}, {k}), ({n}, {k})"
            )
        return pt, qt
    raise DataError(f"unknown imputation kind {kind!r}")
