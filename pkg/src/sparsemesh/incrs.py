"""Indexed CRS: CRS plus one packed counter word per (row, section).

Each row is cut into sections of ``S`` columns and each section into blocks
of ``b`` columns. A section's counter word holds, in its low
``section_prefix_bits``, the number of nonzeros of the row that precede the
section, followed by one ``block_count_bits`` field per block with the
number of nonzeros inside that block. Locating ``B[i][j]`` then costs one
row-pointer read, one counter read and a linear scan of a single block.

Memory accesses are counted in words: one read of ``row_ptr``, of the
counter array, of ``col_indices`` or of ``values`` is one access.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .matrix import CsrMatrix

__all__ = [
    "InCrsConfig",
    "InCrsMatrix",
    "AccessCounter",
    "FormatFamily",
    "build_incrs",
    "pack_counter",
    "unpack_counter",
    "incrs_get",
    "csr_get",
    "gather_column",
    "ma_ratio_estimate",
    "storage_ratio_estimate",
    "table1_cost",
    "measured_ma_ratio",
    "verify_counters",
    "save_incrs",
    "load_incrs",
]


@dataclass(frozen=True)
class InCrsConfig:
    section_size: int = 256
    block_size: int = 32
    section_prefix_bits: int = 16
    block_count_bits: int = 6

    def __post_init__(self):
        S, b = self.section_size, self.block_size
        if b < 1 or S < 1 or S % b:
            raise ValueError(f"section size {S} must be a positive multiple of block size {b}")
        if self.block_count_bits < math.ceil(math.log2(b + 1)):
            raise ValueError(
                f"{self.block_count_bits} bits cannot count 0..{b} nonzeros in a block"
            )
        if self.section_prefix_bits < 1:
            raise ValueError("section_prefix_bits must be positive")
        used = self.section_prefix_bits + self.blocks_per_section * self.block_count_bits
        if used > 64:
            raise ValueError(f"counter layout needs {used} bits, exceeds one 64-bit word")

    @property
    def blocks_per_section(self):
        return self.section_size // self.block_size


@dataclass
class AccessCounter:
    """Word reads charged to an access pattern; mutable, caller owned."""

    element_reads: int = 0
    pointer_reads: int = 0
    counter_reads: int = 0

    @property
    def total(self):
        return self.element_reads + self.pointer_reads + self.counter_reads

    def __iadd__(self, other):
        self.element_reads += other.element_reads
        self.pointer_reads += other.pointer_reads
        self.counter_reads += other.counter_reads
        return self

    def as_dict(self):
        return {
            "element_reads": self.element_reads,
            "pointer_reads": self.pointer_reads,
            "counter_reads": self.counter_reads,
            "total": self.total,
        }


def pack_counter(prefix, block_counts, cfg):
    """Pack one counter word: prefix in the low bits, then block k at
    ``prefix_bits + k * block_bits``."""
    if not 0 <= prefix < (1 << cfg.section_prefix_bits):
        raise OverflowError(f"prefix {prefix} does not fit {cfg.section_prefix_bits} bits")
    word = prefix
    shift = cfg.section_prefix_bits
    limit = 1 << cfg.block_count_bits
    for c in block_counts:
        if not 0 <= c < limit:
            raise OverflowError(f"block count {c} does not fit {cfg.block_count_bits} bits")
        word |= int(c) << shift
        shift += cfg.block_count_bits
    return word


def unpack_counter(word, cfg):
    """Inverse of :func:`pack_counter`: ``(prefix, [block counts])``."""
    word = int(word)
    prefix = word & ((1 << cfg.section_prefix_bits) - 1)
    mask = (1 << cfg.block_count_bits) - 1
    counts = []
    shift = cfg.section_prefix_bits
    for _ in range(cfg.blocks_per_section):
        counts.append((word >> shift) & mask)
        shift += cfg.block_count_bits
    return prefix, counts


def _counter_words(base, cfg):
    """Compute every counter word of ``base`` as a (rows, sections) uint64 array."""
    S, b = cfg.section_size, cfg.block_size
    nsec = -(-base.cols // S)
    nblk = cfg.blocks_per_section
    row = np.repeat(np.arange(base.rows, dtype=np.int64), base.row_nnz())
    sec = base.col_indices // S
    blk = (base.col_indices % S) // b
    counts = np.bincount(
        (row * nsec + sec) * nblk + blk, minlength=base.rows * nsec * nblk
    ).reshape(base.rows, nsec, nblk)
    totals = counts.sum(axis=2)
    prefix = np.cumsum(totals, axis=1) - totals

    words = prefix.astype(np.uint64)
    for k in range(nblk):
        shift = np.uint64(cfg.section_prefix_bits + k * cfg.block_count_bits)
        words |= counts[:, :, k].astype(np.uint64) << shift
    return words


@dataclass(frozen=True)
class InCrsMatrix:
    base: CsrMatrix
    config: InCrsConfig
    counters: np.ndarray

    def __post_init__(self):
        nsec = -(-self.base.cols // self.config.section_size)
        counters = np.array(self.counters, dtype=np.uint64, copy=True).reshape(-1)
        if len(counters) != self.base.rows * nsec:
            raise ValueError(
                f"expected {self.base.rows * nsec} counter words, got {len(counters)}"
            )
        counters.flags.writeable = False
        object.__setattr__(self, "counters", counters)

    @property
    def rows(self):
        return self.base.rows

    @property
    def cols(self):
        return self.base.cols

    @property
    def shape(self):
        return self.base.shape

    @property
    def nnz(self):
        return self.base.nnz

    @property
    def sections_per_row(self):
        return -(-self.base.cols // self.config.section_size)

    def counter(self, i, section):
        return unpack_counter(self.counters[i * self.sections_per_row + section], self.config)

    def storage_words(self):
        """CRS words plus one word per counter vector."""
        return self.base.storage_words() + len(self.counters)

    def storage_ratio(self):
        """Measured CRS / InCRS storage, counting values and indices only."""
        crs = 2 * self.nnz
        return crs / (crs + len(self.counters)) if crs else 0.0


def build_incrs(m, cfg=None):
    """Attach counter vectors to a CSR matrix.

    Raises ``OverflowError`` naming the first row whose nonzero count does
    not fit the prefix field.
    """
    cfg = cfg or InCrsConfig()
    limit = 1 << cfg.section_prefix_bits
    nnz = m.row_nnz()
    over = np.flatnonzero(nnz >= limit)
    if len(over):
        i = int(over[0])
        raise OverflowError(
            f"row {i} has {int(nnz[i])} nonzeros; the {cfg.section_prefix_bits}-bit "
            f"prefix field holds at most {limit - 1}"
        )
    return InCrsMatrix(m, cfg, _counter_words(m, cfg).reshape(-1))


def verify_counters(m):
    """Rebuild the counters from a scan of the base matrix and compare bit-exactly.

    Returns a list of ``(row, section)`` pairs that disagree (empty when the
    matrix is consistent).
    """
    expected = _counter_words(m.base, m.config)
    got = m.counters.reshape(expected.shape)
    bad = np.argwhere(expected != got)
    return [tuple(map(int, rc)) for rc in bad]


def _check_index(m, i, j):
    if not (0 <= i < m.rows and 0 <= j < m.cols):
        raise IndexError(f"({i}, {j}) outside {m.rows}x{m.cols}")


def incrs_get(m, i, j, ctr=None):
    """Look up ``m[i, j]`` through its counter vector, charging ``ctr``."""
    _check_index(m, i, j)
    ctr = ctr if ctr is not None else AccessCounter()
    cfg = m.config
    start = int(m.base.row_ptr[i])
    ctr.pointer_reads += 1
    section, within = divmod(j, cfg.section_size)
    block = within // cfg.block_size
    prefix, counts = m.counter(i, section)
    ctr.counter_reads += 1

    lo = start + prefix + sum(counts[:block])
    cols = m.base.col_indices
    for p in range(lo, lo + counts[block]):
        c = cols[p]
        ctr.element_reads += 1
        if c == j:
            ctr.element_reads += 1
            return float(m.base.values[p])
        if c > j:
            break
    return 0.0


def csr_get(m, i, j, ctr=None):
    """Look up ``m[i, j]`` in plain CRS with a linear scan of row ``i``."""
    _check_index(m, i, j)
    ctr = ctr if ctr is not None else AccessCounter()
    lo, hi = int(m.row_ptr[i]), int(m.row_ptr[i + 1])
    ctr.pointer_reads += 2
    cols = m.col_indices
    for p in range(lo, hi):
        c = cols[p]
        ctr.element_reads += 1
        if c == j:
            ctr.element_reads += 1
            return float(m.values[p])
        if c > j:
            break
    return 0.0


def gather_column(m, j, ctr=None):
    """All nonzeros of column ``j`` as ``(rows, values)`` arrays, ascending rows.

    The access charge equals the sum of :func:`csr_get` / :func:`incrs_get`
    over every row; it is computed in bulk rather than by running the scans.
    """
    if not 0 <= j < m.cols:
        raise IndexError(f"column {j} outside [0, {m.cols})")
    ctr = ctr if ctr is not None else AccessCounter()
    base = m.base if isinstance(m, InCrsMatrix) else m
    M, N = base.rows, base.cols
    rows = np.arange(M, dtype=np.int64)
    start, end = base.row_ptr[:-1], base.row_ptr[1:]
    keys = np.repeat(rows, base.row_nnz()) * N + base.col_indices
    pos = np.searchsorted(keys, rows * N + j)
    hit = (pos < end) & (base.col_indices[np.minimum(pos, base.nnz - 1)] == j) if base.nnz else np.zeros(M, bool)

    if isinstance(m, InCrsMatrix):
        cfg = m.config
        section, within = divmod(j, cfg.section_size)
        block = within // cfg.block_size
        words = m.counters[rows * m.sections_per_row + section]
        mask = np.uint64((1 << cfg.block_count_bits) - 1)
        offset = (words & np.uint64((1 << cfg.section_prefix_bits) - 1)).astype(np.int64)
        for k in range(block):
            offset += ((words >> np.uint64(cfg.section_prefix_bits + k * cfg.block_count_bits)) & mask).astype(np.int64)
        count = ((words >> np.uint64(cfg.section_prefix_bits + block * cfg.block_count_bits)) & mask).astype(np.int64)
        lo = start + offset
        hi = lo + count
        ctr.pointer_reads += M
        ctr.counter_reads += M
    else:
        lo, hi = start, end
        ctr.pointer_reads += 2 * M
    scanned = (pos - lo) + (pos < hi)
    ctr.element_reads += int(scanned.sum() + hit.sum())
    return rows[hit], base.values[pos[hit]]


def ma_ratio_estimate(N, D, b):
    """Predicted CRS/InCRS access ratio for reading one column: ``N*D/(b+2)``."""
    return N * D / (b + 2)


def storage_ratio_estimate(D, S):
    """Predicted CRS/InCRS storage ratio: ``2DS/(2DS+1)``."""
    return 2 * D * S / (2 * D * S + 1)


class FormatFamily(Enum):
    CRS = "crs"  # also ELLPACK and LiL
    JAD = "jad"
    COO = "coo"  # also SLL
    INCRS = "incrs"


def table1_cost(family, M, N, D, b=32):
    """Average word reads to locate one arbitrary element."""
    family = FormatFamily(family)
    if family is FormatFamily.CRS:
        return 0.5 * N * D
    if family is FormatFamily.JAD:
        return N * D
    if family is FormatFamily.COO:
        return 0.5 * M * N * D
    return b / 2 + 1


def measured_ma_ratio(m, cfg=None, probes=100, seed=0):
    """CRS/InCRS total word reads over the same full-column gathers.

    ``probes`` is a count of random columns (drawn with ``seed``) or an
    explicit sequence of column indices. Returns ``(ratio, crs_ctr,
    incrs_ctr)``.
    """
    cfg = cfg or InCrsConfig()
    if isinstance(probes, int):
        columns = np.random.default_rng(seed).integers(0, m.cols, size=probes)
    else:
        columns = np.asarray(probes, dtype=np.int64)
    incrs = build_incrs(m, cfg)
    crs_ctr, incrs_ctr = AccessCounter(), AccessCounter()
    for j in columns.tolist():
        gather_column(m, j, crs_ctr)
        gather_column(incrs, j, incrs_ctr)
    ratio = crs_ctr.total / incrs_ctr.total if incrs_ctr.total else float("nan")
    return ratio, crs_ctr, incrs_ctr


# Binary layout: little-endian 64-bit words. Header is magic, version, M, N,
# nnz, S, b, prefix bits, block bits; then row_ptr, col_indices, values
# (float64) and counters.
MAGIC = int.from_bytes(b"INCRS\x00\x00\x00", "little")
VERSION = 1
_HEADER = struct.Struct("<9Q")


def save_incrs(path, m):
    cfg = m.config
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, m.rows, m.cols, m.nnz, cfg.section_size,
                              cfg.block_size, cfg.section_prefix_bits, cfg.block_count_bits))
        fh.write(m.base.row_ptr.astype("<i8").tobytes())
        fh.write(m.base.col_indices.astype("<i8").tobytes())
        fh.write(m.base.values.astype("<f8").tobytes())
        fh.write(m.counters.astype("<u8").tobytes())


def load_incrs(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, M, N, nnz, S, b, pbits, bbits = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not an InCRS file")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    cfg = InCrsConfig(S, b, pbits, bbits)
    nsec = -(-N // S)
    sizes = [(M + 1, "<i8"), (nnz, "<i8"), (nnz, "<f8"), (M * nsec, "<u8")]
    if len(raw) != _HEADER.size + 8 * sum(n for n, _ in sizes):
        raise ValueError(f"{path}: payload size does not match header")
    arrays, off = [], _HEADER.size
    for n, dt in sizes:
        arrays.append(np.frombuffer(raw, dtype=dt, count=n, offset=off))
        off += 8 * n
    row_ptr, cols, vals, counters = arrays
    base = CsrMatrix(M, N, vals, cols, row_ptr)
    return InCrsMatrix(base, cfg, counters)
