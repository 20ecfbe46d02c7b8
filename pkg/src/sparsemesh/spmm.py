"""Software SpMM: row-of-A by column-of-B merges with instrumented column access."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .incrs import AccessCounter, InCrsMatrix, gather_column
from .matrix import CsrMatrix

__all__ = ["SparseVector", "DotResult", "sparse_dot_alg1", "spmm", "spmm_a_at"]


@dataclass(frozen=True)
class SparseVector:
    index: tuple
    value: tuple

    def __post_init__(self):
        index = tuple(int(i) for i in self.index)
        value = tuple(float(v) for v in self.value)
        if len(index) != len(value):
            raise ValueError("index and value must have equal length")
        if any(b <= a for a, b in zip(index, index[1:])):
            raise ValueError("indices must be strictly increasing")
        object.__setattr__(self, "index", index)
        object.__setattr__(self, "value", value)

    @classmethod
    def from_pairs(cls, pairs):
        pairs = list(pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    def __len__(self):
        return len(self.index)


@dataclass(frozen=True)
class DotResult:
    value: float
    cycles: int
    a_consumed: int
    b_consumed: int


def sparse_dot_alg1(a, b):
    """Merge two sorted sparse vectors one comparison per cycle.

    Equal indices multiply-accumulate and consume both operands; otherwise
    only the operand with the smaller index is consumed. The loop stops as
    soon as either stream runs out.
    """
    ai, av = a.index, a.value
    bi, bv = b.index, b.value
    na, nb = len(ai), len(bi)
    i = j = cycles = 0
    c = 0.0
    while i < na and j < nb:
        cycles += 1
        x, y = ai[i], bi[j]
        if x == y:
            c += av[i] * bv[j]
            i += 1
            j += 1
        elif x > y:
            j += 1
        else:
            i += 1
    return DotResult(c, cycles, i, j)


def _assemble(rows, cols, columns):
    """Build CSR from per-column ``(row_indices, values)`` lists, dropping zeros."""
    r, c, v = [], [], []
    for j, (ri, vals) in enumerate(columns):
        for i, x in zip(ri, vals):
            if x != 0.0:
                r.append(i)
                c.append(j)
                v.append(x)
    r = np.asarray(r, dtype=np.int64)
    c = np.asarray(c, dtype=np.int64)
    v = np.asarray(v, dtype=np.float64)
    order = np.lexsort((c, r))
    row_ptr = np.zeros(rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(r, minlength=rows), out=row_ptr[1:])
    return CsrMatrix(rows, cols, v[order], c[order], row_ptr)


def _rows_as_vectors(a):
    idx, val = a.col_indices.tolist(), a.values.tolist()
    ptr = a.row_ptr.tolist()
    return [SparseVector(idx[ptr[i]:ptr[i + 1]], val[ptr[i]:ptr[i + 1]]) for i in range(a.rows)]


def _multiply(a_rows, rows, column_source, ncols):
    columns = []
    for j in range(ncols):
        col = column_source(j)
        if not len(col):
            columns.append(((), ()))
            continue
        ri, vals = [], []
        for i, row in enumerate(a_rows):
            if row.index:
                value = sparse_dot_alg1(row, col).value
                if value != 0.0:
                    ri.append(i)
                    vals.append(value)
        columns.append((ri, vals))
    return _assemble(rows, ncols, columns)


def spmm(a, b, ctr=None):
    """Compute ``a @ b`` with ``a`` read by rows and ``b`` by columns.

    Each column of ``b`` is gathered once (through CRS or InCRS, charging
    ``ctr``) and reused against every row of ``a``.
    """
    if a.cols != b.rows:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    if not isinstance(b, (CsrMatrix, InCrsMatrix)):
        raise TypeError(f"unsupported right operand {type(b).__name__}")
    ctr = ctr if ctr is not None else AccessCounter()

    def column(j):
        ri, vals = gather_column(b, j, ctr)
        return SparseVector(ri.tolist(), vals.tolist())

    return _multiply(_rows_as_vectors(a), a.rows, column, b.cols)


def spmm_a_at(a):
    """``a @ a.T``; column ``j`` of ``a.T`` is read directly as row ``j`` of ``a``."""
    rows = _rows_as_vectors(a)
    return _multiply(rows, a.rows, rows.__getitem__, a.rows)
