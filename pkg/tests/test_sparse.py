"""COO accumulation, CSR finalization, stats, Matrix Market export."""

import io

import numpy as np
import pytest

from mrfv.sparse import MatrixStats, SparseMatrix, matrix_stats


def small_matrix():
    m = SparseMatrix(3)
    m.add(0, 0, 2.0)
    m.add(0, 1, -1.0)
    m.add(1, 0, -1.0)
    m.add(1, 1, 2.0)
    m.add(2, 2, 1.0)
    m.add(0, 1, 0.5)     # duplicate, must merge by summation
    return m.finalize()


def test_finalize_merges_duplicates():
    m = small_matrix()
    assert m.nnz == 5
    assert np.array_equal(m.row_ptr, [0, 2, 4, 5])
    assert np.array_equal(m.col_idx, [0, 1, 0, 1, 2])
    assert np.array_equal(m.values, [2.0, -0.5, -1.0, 2.0, 1.0])


def test_finalize_idempotent_and_locks():
    m = small_matrix()
    assert m.finalize() is m
    with pytest.raises(RuntimeError):
        m.add(0, 0, 1.0)


def test_to_dense_and_diagonal():
    m = small_matrix()
    expect = np.array([[2.0, -0.5, 0.0], [-1.0, 2.0, 0.0], [0.0, 0.0, 1.0]])
    assert np.array_equal(m.to_dense(), expect)
    assert np.array_equal(m.diagonal(), [2.0, 2.0, 1.0])


def test_diagonal_with_empty_row():
    m = SparseMatrix(3)
    m.add(0, 0, 4.0)
    m.add(2, 1, 1.0)     # row 1 empty, row 2 off-diagonal only
    m.finalize()
    assert np.array_equal(m.diagonal(), [4.0, 0.0, 0.0])


def test_stats():
    s = small_matrix().stats()
    assert s == MatrixStats(3, 5, 5.0 / 3.0, 3.0 / 5.0)
    # (0,1) = -0.5 vs (1,0) = -1.0: present but mismatched, so only the
    # three diagonal entries count as symmetric
    assert matrix_stats(small_matrix()) == s


def test_stats_symmetric_matrix():
    m = SparseMatrix(2)
    m.add(0, 0, -2.0)
    m.add(0, 1, 1.0)
    m.add(1, 0, 1.0)
    m.add(1, 1, -2.0)
    m.finalize()
    assert m.stats().symmetry_fraction == 1.0


def test_stats_empty():
    m = SparseMatrix(4).finalize()
    s = m.stats()
    assert s.nnz == 0
    assert s.symmetry_fraction == 1.0


def test_out_of_bounds_entry():
    m = SparseMatrix(2)
    m.add(0, 2, 1.0)
    with pytest.raises(ValueError):
        m.finalize()
    with pytest.raises(ValueError):
        SparseMatrix(0)


def test_require_finalized():
    m = SparseMatrix(2)
    m.add(0, 0, 1.0)
    with pytest.raises(RuntimeError):
        m.to_dense()
    with pytest.raises(RuntimeError):
        m.stats()


def test_matrix_market_export():
    buf = io.StringIO()
    small_matrix().write_matrix_market(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "%%MatrixMarket matrix coordinate real general"
    assert lines[1].startswith("% nnz=5 ratio=")
    assert "symmetry_fraction=0.59999999999999998" in lines[1]
    assert lines[2] == "3 3 5"
    assert lines[3] == "1 1 2"
    assert lines[4] == "1 2 -0.5"
    assert lines[-1] == "3 3 1"
    assert len(lines) == 3 + 5


def test_merge_order_is_deterministic():
    # same entries, same insertion order, same bytes out
    outs = []
    for _ in range(2):
        m = SparseMatrix(4)
        rng = np.random.default_rng(42)
        for _ in range(50):
            m.add(int(rng.integers(4)), int(rng.integers(4)),
                  float(rng.standard_normal()))
        m.finalize()
        buf = io.StringIO()
        m.write_matrix_market(buf)
        outs.append(buf.getvalue())
    assert outs[0] == outs[1]
