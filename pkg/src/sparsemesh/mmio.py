"""Matrix Market coordinate-format reader and writer."""

from __future__ import annotations

import numpy as np

from .matrix import CooMatrix

__all__ = ["MatrixMarketError", "load_matrix_market", "save_matrix_market"]


class MatrixMarketError(ValueError):
    pass


_FIELDS = {"real", "integer"}
_SYMMETRY = {"general", "symmetric"}


def load_matrix_market(path):
    """Read a coordinate Matrix Market file into a 0-based :class:`CooMatrix`.

    Symmetric files are expanded eagerly; pattern, complex and array files
    are rejected.
    """
    with open(path, "r") as fh:
        header = fh.readline()
        parts = header.strip().split()
        if len(parts) != 5 or parts[0].lower() != "%%matrixmarket":
            raise MatrixMarketError(f"{path}: malformed header {header.strip()!r}")
        obj, fmt, field, symmetry = (p.lower() for p in parts[1:])
        if obj != "matrix" or fmt != "coordinate":
            raise MatrixMarketError(f"{path}: only 'matrix coordinate' files are supported")
        if field == "pattern":
            raise MatrixMarketError(
                f"{path}: pattern-only files carry no values; convert to real first"
            )
        if field not in _FIELDS:
            raise MatrixMarketError(f"{path}: unsupported field {field!r}")
        if symmetry not in _SYMMETRY:
            raise MatrixMarketError(f"{path}: unsupported symmetry {symmetry!r}")

        line = fh.readline()
        while line and (line.startswith("%") or not line.strip()):
            line = fh.readline()
        try:
            rows, cols, nnz = (int(x) for x in line.split())
        except ValueError:
            raise MatrixMarketError(f"{path}: malformed size line {line.strip()!r}") from None

        r, c, v = [], [], []
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.startswith("%"):
                continue
            tok = line.split()
            if len(tok) != 3:
                raise MatrixMarketError(f"{path}: entry {lineno} has {len(tok)} fields, expected 3")
            i, j = int(tok[0]), int(tok[1])
            if not (1 <= i <= rows and 1 <= j <= cols):
                raise MatrixMarketError(
                    f"{path}: entry ({i}, {j}) outside {rows}x{cols} (1-based)"
                )
            r.append(i - 1)
            c.append(j - 1)
            v.append(float(tok[2]))
    if len(r) != nnz:
        raise MatrixMarketError(f"{path}: header declares {nnz} entries, found {len(r)}")

    r = np.asarray(r, dtype=np.int64)
    c = np.asarray(c, dtype=np.int64)
    v = np.asarray(v, dtype=np.float64)
    if symmetry == "symmetric":
        off = r != c
        r, c, v = (np.concatenate([r, c[off]]), np.concatenate([c, r[off]]),
                   np.concatenate([v, v[off]]))
    return CooMatrix(rows, cols, r, c, v)


def save_matrix_market(path, m, comment=None):
    """Write ``m`` (COO or CSR) as a general real coordinate file."""
    if not isinstance(m, CooMatrix):
        from .matrix import csr_to_coo

        m = csr_to_coo(m)
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{m.rows} {m.cols} {m.nnz}\n")
        for i, j, x in zip(m.row.tolist(), m.col.tolist(), m.val.tolist()):
            fh.write(f"{i + 1} {j + 1} {x!r}\n")
