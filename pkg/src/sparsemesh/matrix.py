"""Sparse matrix containers, conversions and the dense multiplication oracle.

All containers are immutable once built: their numpy arrays are flagged
read-only so they can be shared between readers without copying.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CooMatrix",
    "CsrMatrix",
    "CcsMatrix",
    "MatrixStats",
    "coo_to_csr",
    "csr_to_coo",
    "csr_to_ccs",
    "ccs_to_csr",
    "csr_from_dense",
    "dense_matmul",
    "matrix_stats",
]


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype, copy=True).reshape(-1)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class CooMatrix:
    """Coordinate-list matrix; the interchange format for builds and I/O."""

    rows: int
    cols: int
    row: np.ndarray
    col: np.ndarray
    val: np.ndarray

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise ValueError(f"negative shape ({self.rows}, {self.cols})")
        row = _frozen(self.row, np.int64)
        col = _frozen(self.col, np.int64)
        val = _frozen(self.val, np.float64)
        if not (len(row) == len(col) == len(val)):
            raise ValueError("row, col and val must have equal length")
        if len(row):
            bad = (row < 0) | (row >= self.rows) | (col < 0) | (col >= self.cols)
            if bad.any():
                k = int(np.flatnonzero(bad)[0])
                raise IndexError(
                    f"entry ({row[k]}, {col[k]}) outside {self.rows}x{self.cols}"
                )
        object.__setattr__(self, "row", row)
        object.__setattr__(self, "col", col)
        object.__setattr__(self, "val", val)

    @classmethod
    def from_triplets(cls, rows, cols, triplets):
        triplets = list(triplets)
        if not triplets:
            return cls(rows, cols, [], [], [])
        r, c, v = zip(*triplets)
        return cls(rows, cols, r, c, v)

    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def nnz(self):
        return len(self.val)

    def triplets(self):
        return list(zip(self.row.tolist(), self.col.tolist(), self.val.tolist()))

    def sorted(self):
        """Return a copy with entries in row-major order."""
        order = np.lexsort((self.col, self.row))
        return CooMatrix(self.rows, self.cols, self.row[order], self.col[order], self.val[order])

    def to_dense(self):
        out = np.zeros((self.rows, self.cols))
        out[self.row, self.col] = self.val
        return out


@dataclass(frozen=True)
class CsrMatrix:
    """Compressed row storage: ``values``/``col_indices`` plus ``row_ptr``.

    The constructor validates every structural invariant (monotone row
    pointers, strictly increasing column indices within a row, matching
    lengths), so any ``CsrMatrix`` that exists is well formed.
    """

    rows: int
    cols: int
    values: np.ndarray
    col_indices: np.ndarray
    row_ptr: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values, np.float64)
        col_indices = _frozen(self.col_indices, np.int64)
        row_ptr = _frozen(self.row_ptr, np.int64)
        _check_compressed(self.rows, self.cols, values, col_indices, row_ptr, "row")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "col_indices", col_indices)
        object.__setattr__(self, "row_ptr", row_ptr)

    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def nnz(self):
        return int(self.row_ptr[-1])

    @property
    def density(self):
        size = self.rows * self.cols
        return self.nnz / size if size else 0.0

    def row(self, i):
        """Column indices and values of row ``i`` (read-only views)."""
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        return self.col_indices[lo:hi], self.values[lo:hi]

    def row_nnz(self):
        return np.diff(self.row_ptr)

    def to_dense(self):
        out = np.zeros((self.rows, self.cols))
        row = np.repeat(np.arange(self.rows), self.row_nnz())
        out[row, self.col_indices] = self.values
        return out

    def transpose(self):
        """Return the transpose, again in CSR."""
        ccs = csr_to_ccs(self)
        return CsrMatrix(self.cols, self.rows, ccs.values, ccs.row_indices, ccs.col_ptr)

    def storage_words(self):
        """Words needed by values, column indices and row pointers."""
        return 2 * self.nnz + self.rows + 1


@dataclass(frozen=True)
class CcsMatrix:
    """Compressed column storage, the transpose layout of :class:`CsrMatrix`."""

    rows: int
    cols: int
    values: np.ndarray
    row_indices: np.ndarray
    col_ptr: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values, np.float64)
        row_indices = _frozen(self.row_indices, np.int64)
        col_ptr = _frozen(self.col_ptr, np.int64)
        _check_compressed(self.cols, self.rows, values, row_indices, col_ptr, "column")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "row_indices", row_indices)
        object.__setattr__(self, "col_ptr", col_ptr)

    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def nnz(self):
        return int(self.col_ptr[-1])

    def col(self, j):
        lo, hi = self.col_ptr[j], self.col_ptr[j + 1]
        return self.row_indices[lo:hi], self.values[lo:hi]

    def to_dense(self):
        out = np.zeros((self.rows, self.cols))
        col = np.repeat(np.arange(self.cols), np.diff(self.col_ptr))
        out[self.row_indices, col] = self.values
        return out


def _check_compressed(major, minor, values, indices, ptr, axis):
    if major < 0 or minor < 0:
        raise ValueError(f"negative shape ({major}, {minor})")
    if len(ptr) != major + 1:
        raise ValueError(f"{axis} pointer must have {major + 1} entries, got {len(ptr)}")
    if ptr[0] != 0:
        raise ValueError(f"{axis} pointer must start at 0")
    if np.any(np.diff(ptr) < 0):
        raise ValueError(f"{axis} pointer must be non-decreasing")
    nnz = int(ptr[-1])
    if len(values) != nnz or len(indices) != nnz:
        raise ValueError(
            f"expected {nnz} stored entries, got {len(values)} values and {len(indices)} indices"
        )
    if nnz == 0:
        return
    if indices.min() < 0 or indices.max() >= minor:
        raise IndexError(f"index out of range [0, {minor})")
    # strictly increasing inside each segment: every step that is not a
    # segment start must increase
    step_ok = np.diff(indices) > 0
    starts = np.zeros(nnz, dtype=bool)
    starts[ptr[:-1][np.diff(ptr) > 0]] = True
    if not np.all(step_ok | starts[1:]):
        k = int(np.flatnonzero(~(step_ok | starts[1:]))[0]) + 1
        seg = int(np.searchsorted(ptr, k, side="right")) - 1
        raise ValueError(f"indices not strictly increasing within {axis} {seg}")


def coo_to_csr(m):
    """Build a :class:`CsrMatrix` from a :class:`CooMatrix`.

    Duplicate coordinates are rejected rather than summed.
    """
    order = np.lexsort((m.col, m.row))
    row, col, val = m.row[order], m.col[order], m.val[order]
    if len(row) > 1:
        dup = (row[1:] == row[:-1]) & (col[1:] == col[:-1])
        if dup.any():
            k = int(np.flatnonzero(dup)[0])
            raise ValueError(f"duplicate entry at ({row[k]}, {col[k]})")
    row_ptr = np.zeros(m.rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(row, minlength=m.rows), out=row_ptr[1:])
    return CsrMatrix(m.rows, m.cols, val, col, row_ptr)


def csr_to_coo(m):
    row = np.repeat(np.arange(m.rows), m.row_nnz())
    return CooMatrix(m.rows, m.cols, row, m.col_indices, m.values)


def csr_to_ccs(m):
    """Reorder a CSR matrix into column-major storage."""
    row = np.repeat(np.arange(m.rows, dtype=np.int64), m.row_nnz())
    # stable sort on column keeps row order ascending within each column
    order = np.argsort(m.col_indices, kind="stable")
    col_ptr = np.zeros(m.cols + 1, dtype=np.int64)
    np.cumsum(np.bincount(m.col_indices, minlength=m.cols), out=col_ptr[1:])
    return CcsMatrix(m.rows, m.cols, m.values[order], row[order], col_ptr)


def ccs_to_csr(m):
    t = CsrMatrix(m.cols, m.rows, m.values, m.row_indices, m.col_ptr)
    return t.transpose()


def csr_from_dense(a):
    """Compress a 2-D array, dropping exact zeros."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {a.shape}")
    row, col = np.nonzero(a)
    row_ptr = np.zeros(a.shape[0] + 1, dtype=np.int64)
    np.cumsum(np.bincount(row, minlength=a.shape[0]), out=row_ptr[1:])
    return CsrMatrix(a.shape[0], a.shape[1], a[row, col], col, row_ptr)


def dense_matmul(a, b):
    """Exact dense product with a fixed summation order.

    Every output element is accumulated as
    ``((0 + a[i,0]*b[0,j]) + a[i,1]*b[1,j]) + ...`` with ascending inner
    index, which is the order all simulated architectures reproduce. BLAS is
    deliberately avoided because its blocking changes the rounding.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("dense_matmul expects 2-D operands")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]))
    for k in range(a.shape[1]):
        out += np.multiply.outer(a[:, k], b[k, :])
    return out


@dataclass(frozen=True)
class MatrixStats:
    rows: int
    cols: int
    nnz: int
    density: float
    nz_min: int
    nz_mean: float
    nz_max: int

    def as_dict(self):
        return dict(self.__dict__)


def matrix_stats(m):
    counts = m.row_nnz()
    if m.rows == 0:
        lo, mean, hi = 0, 0.0, 0
    else:
        lo, mean, hi = int(counts.min()), float(counts.mean()), int(counts.max())
    return MatrixStats(m.rows, m.cols, m.nnz, m.density, lo, mean, hi)
