import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extremesim.data import (
    MM_BANNER,
    build_imputation,
    load_dataset,
    load_interactions,
    make_split,
    read_dense,
    write_dense,
    write_interactions,
)
from extremesim.errors import DataError, ParseError, ValidationError
from extremesim.linalg import SparseMatrixDual


def _write(tmp_path, text, name="x.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_headerless_lines(tmp_path):
    obs = load_interactions(_write(tmp_path, "1 1 1\n2 1 1\n"))
    assert obs.nnz == 2 and obs.shape == (2, 1)
    np.testing.assert_array_equal(obs.column(0), [0, 1])


def test_empty_with_header(tmp_path):
    obs = load_interactions(_write(tmp_path, f"{MM_BANNER}\n5 4 0\n"))
    assert obs.shape == (5, 4) and obs.nnz == 0


def test_parse_error_has_line_number(tmp_path):
    with pytest.raises(ParseError) as info:
        load_interactions(_write(tmp_path, "1 1 1\n2 x 1\n"))
    assert info.value.lineno == 2
    with pytest.raises(ParseError):
        load_interactions(_write(tmp_path, "0 1 1\n"))
    with pytest.raises(ParseError):
        load_interactions(_write(tmp_path, f"{MM_BANNER}\n2 2 1\n3 1 1\n"))


def test_duplicates_rejected(tmp_path):
    with pytest.raises(ValidationError):
        load_interactions(_write(tmp_path, "1 1 1\n1 1 1\n"))


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_interactions(tmp_path / "absent.txt")


def test_test_file_shares_index_space(tmp_path):
    tr = _write(tmp_path, f"{MM_BANNER}\n3 3 1\n1 1 1\n", "tr.txt")
    te = _write(tmp_path, "3 3 1\n", "te.txt")
    bundle = load_dataset(tr, te)
    assert bundle.test.shape == (3, 3) and (bundle.m, bundle.n) == (3, 3)
    bad = _write(tmp_path, "4 1 1\n", "bad.txt")
    with pytest.raises(ValidationError):
        load_dataset(tr, bad)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_roundtrip(tmp_path_factory, m, n, seed):
    rng = np.random.default_rng(seed)
    dense = rng.normal(size=(m, n)) * (rng.random((m, n)) < 0.5)
    obs = SparseMatrixDual.from_dense(dense)
    p = tmp_path_factory.mktemp("rt") / "o.txt"
    write_interactions(p, obs, "comment")
    back = load_interactions(p)
    assert back.shape == obs.shape
    np.testing.assert_array_equal(back.rows, obs.rows)
    np.testing.assert_array_equal(back.cols, obs.cols)
    np.testing.assert_array_equal(back.values, obs.values)


def test_split_sizes_and_determinism():
    obs = SparseMatrixDual(np.arange(10), np.zeros(10, dtype=int), np.ones(10), (10, 1))
    tr, te = make_split(obs, 0.9, 3)
    assert (tr.nnz, te.nnz) == (9, 1)
    tr2, _ = make_split(obs, 0.9, 3)
    np.testing.assert_array_equal(tr.rows, tr2.rows)
    small = SparseMatrixDual(np.arange(4), np.zeros(4, dtype=int), np.ones(4), (4, 1))
    tr, te = make_split(small, 0.5, 0)
    assert (tr.nnz, te.nnz) == (2, 2)
    with pytest.raises(ValidationError):
        make_split(small, 0.99, 0)
    with pytest.raises(ValidationError):
        make_split(small, 1.0, 0)


def test_constant_imputation():
    pt, qt = build_imputation("constant", 4, 3, 2)
    assert np.all(pt == -0.5) and np.all(qt == 0.5)
    np.testing.assert_array_equal(pt @ qt.T, -np.ones((3, 2)))
    pt, qt = build_imputation("constant", 1, 2, 2)
    assert np.all(pt == -1.0) and np.all(qt == 1.0)


def test_file_imputation(tmp_path):
    write_dense(tmp_path / "p.txt", np.ones((3, 2)))
    write_dense(tmp_path / "q.txt", np.ones((2, 3)))
    with pytest.raises(ValidationError):
        build_imputation("file", 2, 3, 2, tmp_path / "p.txt", tmp_path / "q.txt")
    write_dense(tmp_path / "q.txt", 2 * np.ones((2, 2)))
    pt, qt = build_imputation("file", 2, 3, 2, tmp_path / "p.txt", tmp_path / "q.txt")
    assert pt.shape == (3, 2) and np.all(qt == 2.0)


def test_dense_roundtrip_and_header(tmp_path, rng):
    a = rng.normal(size=(4, 3))
    write_dense(tmp_path / "a.txt", a)
    np.testing.assert_array_equal(read_dense(tmp_path / "a.txt"), a)
    (tmp_path / "b.txt").write_text("1 2\n3 4\n")
    with pytest.raises(ParseError):
        read_dense(tmp_path / "b.txt")
