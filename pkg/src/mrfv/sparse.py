"""Sparse operator storage: COO accumulation, deterministic CSR finalization."""

from __future__ import annotations

from typing import NamedTuple, TextIO

import numpy as np


class MatrixStats(NamedTuple):
    n: int
    nnz: int
    ratio: float
    symmetry_fraction: float


class SparseMatrix:
    """Square sparse matrix assembled by repeated ``add`` calls.

    ``finalize`` sorts entries by (row, col) with a stable order, merges
    duplicates by summation (in insertion order, so results are reproducible)
    and freezes the matrix in CSR form.
    """

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("matrix dimension must be positive")
        self.n = n
        self._ri: list[int] = []
        self._ci: list[int] = []
        self._vv: list[float] = []
        self.row_ptr: np.ndarray | None = None
        self.col_idx: np.ndarray | None = None
        self.values: np.ndarray | None = None

    @property
    def finalized(self) -> bool:
        return self.row_ptr is not None

    def add(self, i: int, j: int, v: float) -> None:
        if self.finalized:
            raise RuntimeError("matrix is finalized")
        self._ri.append(i)
        self._ci.append(j)
        self._vv.append(v)

    def finalize(self) -> "SparseMatrix":
        if self.finalized:
            return self
        rows = np.asarray(self._ri, dtype=np.int64)
        cols = np.asarray(self._ci, dtype=np.int64)
        vals = np.asarray(self._vv, dtype=float)
        if rows.size and (rows.min() < 0 or rows.max() >= self.n
                          or cols.min() < 0 or cols.max() >= self.n):
            raise ValueError("entry outside matrix bounds")
        order = np.lexsort((cols, rows))  # stable: ties keep insertion order
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            first = np.ones(rows.size, dtype=bool)
            first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            starts = np.flatnonzero(first)
            self.values = np.add.reduceat(vals, starts)
            rows = rows[starts]
            self.col_idx = cols[starts]
        else:
            self.values = vals
            self.col_idx = cols
        counts = np.bincount(rows, minlength=self.n)
        self.row_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self._ri = self._ci = self._vv = []  # type: ignore[assignment]
        return self

    @property
    def nnz(self) -> int:
        if not self.finalized:
            return len(self._vv)
        return int(self.values.size)

    def require_finalized(self) -> None:
        if not self.finalized:
            raise RuntimeError("matrix must be finalized first")

    def diagonal(self) -> np.ndarray:
        self.require_finalized()
        out = np.zeros(self.n)
        rows = np.repeat(np.arange(self.n), np.diff(self.row_ptr))
        on_diag = self.col_idx == rows
        out[rows[on_diag]] = self.values[on_diag]
        return out

    def to_dense(self) -> np.ndarray:
        self.require_finalized()
        out = np.zeros((self.n, self.n))
        rows = np.repeat(np.arange(self.n), np.diff(self.row_ptr))
        out[rows, self.col_idx] = self.values
        return out

    def stats(self, sym_tol_factor: float = 1e-12) -> MatrixStats:
        """Structural stats; the symmetry fraction counts stored (i, j) whose
        transpose partner is stored with a matching value (absolute tolerance
        ``sym_tol_factor * max|a|``)."""
        self.require_finalized()
        nnz = self.nnz
        if nnz == 0:
            return MatrixStats(self.n, 0, 0.0, 1.0)
        rows = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.row_ptr))
        keys = rows * self.n + self.col_idx
        tkeys = self.col_idx * self.n + rows
        pos = np.searchsorted(keys, tkeys)
        pos_c = np.minimum(pos, nnz - 1)
        found = keys[pos_c] == tkeys
        tol = sym_tol_factor * np.max(np.abs(self.values))
        matched = found & (np.abs(self.values - self.values[pos_c]) <= tol)
        return MatrixStats(self.n, nnz, nnz / self.n,
                           float(matched.sum()) / nnz)

    def write_matrix_market(self, stream: TextIO) -> None:
        """Coordinate-format ASCII export, 1-based, deterministic CSR order."""
        self.require_finalized()
        s = self.stats()
        stream.write("%%MatrixMarket matrix coordinate real general\n")
        stream.write(f"% nnz={s.nnz} ratio={s.ratio:.17g} "
                     f"symmetry_fraction={s.symmetry_fraction:.17g}\n")
        stream.write(f"{self.n} {self.n} {s.nnz}\n")
        rows = np.repeat(np.arange(self.n), np.diff(self.row_ptr))
        for i, j, v in zip(rows, self.col_idx, self.values):
            stream.write(f"{i + 1} {j + 1} {v:.17g}\n")


def matrix_stats(matrix: SparseMatrix) -> MatrixStats:
    return matrix.stats()
