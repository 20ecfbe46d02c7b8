"""Cycle-level models of three matrix-multiply meshes.

* ``conventional`` -- an output-stationary dense systolic array; zeros cost
  cycles like any other operand.
* ``fpic`` -- 8x8 units whose nodes each merge their own row/column pair
  independently (one comparison per cycle); a tile finishes when its slowest
  node does and several units are assumed perfectly load balanced.
* ``syncmesh`` -- a comparator mesh whose nodes always consume one operand
  pair per cycle, parking the larger-index operand in a small sorted buffer.
  Row and column feeders advance in index windows of ``round_len``; every
  window ends in a barrier that also clears all node buffers.

Every operation (compare, MAC, buffer search) takes one cycle. Tiles are
processed back to back on one mesh; each tile pays a ``2*mesh_dim - 2``
cycle wavefront fill/drain once.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .matrix import CooMatrix, CsrMatrix, coo_to_csr
from .spmm import SparseVector, sparse_dot_alg1

__all__ = [
    "Arch",
    "ArchConfig",
    "NodeState",
    "Resources",
    "SimReport",
    "SimulationError",
    "FPIC_EDGE",
    "sync_node_step",
    "run_sync_mesh",
    "run_fpic",
    "run_conventional",
    "run_arch",
    "conventional_cycles",
    "parity_sizing",
    "resource_account",
    "table5_configs",
    "parse_arch_config",
    "load_arch_config",
    "result_checksum",
]

FPIC_EDGE = 8
FPIC_BUFFER_ENTRIES = 32
_INF = np.iinfo(np.int64).max

UNSET, FLAG_A, FLAG_B = 0, 1, 2


class SimulationError(RuntimeError):
    """An internal invariant of a simulated node was violated."""


class Arch(str, Enum):
    CONVENTIONAL = "conventional"
    FPIC = "fpic"
    SYNC = "syncmesh"


@dataclass(frozen=True)
class ArchConfig:
    """Architecture parameters.

    ``mesh_dim`` is the mesh edge (8 for FPIC), ``unit_count`` the number of
    FPIC units, ``round_len`` the synchronization window R and
    ``buffer_depth`` the operand-buffer capacity per node (SyncMesh) or per
    input buffer (FPIC). ``name`` labels the configuration in reports.
    """

    arch: Arch
    mesh_dim: int
    unit_count: int = 1
    round_len: int = 32
    buffer_depth: int | None = None
    index_bits: int = 16
    value_bits: int = 32
    name: str | None = None

    def __post_init__(self):
        arch = Arch(self.arch)
        object.__setattr__(self, "arch", arch)
        if self.name is None:
            object.__setattr__(self, "name", arch.value)
        if self.buffer_depth is None:
            depth = {Arch.SYNC: self.round_len, Arch.FPIC: FPIC_BUFFER_ENTRIES,
                     Arch.CONVENTIONAL: 0}[arch]
            object.__setattr__(self, "buffer_depth", depth)
        if min(self.mesh_dim, self.unit_count, self.round_len, self.index_bits,
               self.value_bits) <= 0:
            raise ValueError("mesh size, unit count, round length and widths must be positive")
        if arch is Arch.FPIC and self.mesh_dim != FPIC_EDGE:
            raise ValueError(f"FPIC units are fixed at {FPIC_EDGE}x{FPIC_EDGE}")
        if arch is not Arch.FPIC and self.unit_count != 1:
            raise ValueError(f"{arch.value} runs as a single unit")
        if arch is Arch.SYNC and self.buffer_depth != self.round_len:
            raise ValueError("synchronized mesh buffers must hold exactly round_len operands")

    @property
    def total_bits(self):
        return self.index_bits + self.value_bits

    @classmethod
    def sync_mesh(cls, mesh_dim=64, round_len=32, **kw):
        return cls(Arch.SYNC, mesh_dim, round_len=round_len, **kw)

    @classmethod
    def fpic(cls, units=1, **kw):
        return cls(Arch.FPIC, FPIC_EDGE, unit_count=units, **kw)

    @classmethod
    def conventional(cls, mesh_dim, **kw):
        return cls(Arch.CONVENTIONAL, mesh_dim, **kw)


@dataclass(frozen=True)
class Resources:
    mac_units: int
    buffer_kB: float
    bandwidth_kb_per_cycle: float


@dataclass
class NodeState:
    """Accumulator, operand buffer and flag of one synchronized-mesh node."""

    acc: float = 0.0
    buffer: list = field(default_factory=list)
    flag: int = UNSET
    mac_ops: int = 0
    searches: int = 0
    max_comparisons: int = 0
    high_water: int = 0

    def reset(self):
        self.buffer.clear()
        self.flag = UNSET


@dataclass
class SimReport:
    arch: str
    config: ArchConfig
    total_cycles: float
    unit_cycles: int
    per_round_cycles: list
    skew_cycles: int
    buffer_high_water: int
    mac_ops: int
    resources: Resources
    result: CsrMatrix
    buffer_searches: int = 0
    max_search_comparisons: int = 0
    stall_cycles: int = 0

    @property
    def checksum(self):
        return result_checksum(self.result)

    def to_json_dict(self):
        cfg = asdict(self.config)
        cfg["arch"] = self.config.arch.value
        return {
            "arch": self.arch,
            "config": cfg,
            "total_cycles": self.total_cycles,
            "unit_cycles": self.unit_cycles,
            "per_round_cycles": list(self.per_round_cycles),
            "skew_cycles": self.skew_cycles,
            "buffer_high_water": self.buffer_high_water,
            "mac_ops": self.mac_ops,
            "buffer_searches": self.buffer_searches,
            "max_search_comparisons": self.max_search_comparisons,
            "stall_cycles": self.stall_cycles,
            "resources": asdict(self.resources),
            "checksum": self.checksum,
        }


def result_checksum(m):
    """SHA-256 over the canonical little-endian CSR arrays of ``m``."""
    h = hashlib.sha256()
    h.update(np.array([m.rows, m.cols], dtype="<i8").tobytes())
    h.update(m.row_ptr.astype("<i8").tobytes())
    h.update(m.col_indices.astype("<i8").tobytes())
    h.update(m.values.astype("<f8").tobytes())
    return h.hexdigest()


# ---------------------------------------------------------------- sizing


def parity_sizing(n_synch, w_idx=16, w_val=32):
    """FPIC unit counts and conventional mesh edge that match a synchronized mesh.

    Returns ``(k_same_bandwidth, k_same_buffer, n_conv)`` where the first
    equates input bandwidth (``2*n*W = 2*8*k*W``), the second the number of
    32-entry buffers (``n**2 = 2*8**2*k``) and the third the input bandwidth
    of a dense mesh carrying values only.

    Buffer parity has no whole-unit answer unless ``n_synch**2`` is a
    multiple of 128; that entry is then ``None``. Other non-integral
    results raise ``ValueError``.
    """
    if n_synch <= 0 or n_synch % FPIC_EDGE:
        raise ValueError(f"n_synch={n_synch} must be a positive multiple of {FPIC_EDGE}")
    buffers = 2 * FPIC_EDGE ** 2
    k_buf = n_synch * n_synch // buffers if (n_synch * n_synch) % buffers == 0 else None
    w_tot = w_idx + w_val
    if (w_tot * n_synch) % w_val:
        raise ValueError(f"(W_idx+W_val)/W_val*n_synch is not integral for widths {w_idx}/{w_val}")
    return n_synch // FPIC_EDGE, k_buf, w_tot * n_synch // w_val


def resource_account(cfg):
    """MAC units, operand-buffer kB and input bandwidth (kb/cycle)."""
    n, w_tot = cfg.mesh_dim, cfg.total_bits
    if cfg.arch is Arch.SYNC:
        macs = n * n
        buffer_bits = n * n * cfg.buffer_depth * w_tot
        bw_bits = 2 * n * w_tot
    elif cfg.arch is Arch.FPIC:
        k = cfg.unit_count
        macs = FPIC_EDGE ** 2 * k
        buffer_bits = k * 2 * FPIC_EDGE ** 2 * cfg.buffer_depth * w_tot
        bw_bits = 2 * FPIC_EDGE * k * w_tot
    else:
        macs = n * n
        buffer_bits = 0
        # dense operands need no index bits
        bw_bits = 2 * n * cfg.value_bits
    return Resources(macs, buffer_bits / 8 / 1024, bw_bits / 1024)


def table5_configs(n_synch=64, round_len=32, w_idx=16, w_val=32):
    """The synchronized mesh and its parity-sized competitors.

    ``fpic-same-buffer`` is left out when buffer parity is not a whole
    number of units.
    """
    k_bw, k_buf, n_conv = parity_sizing(n_synch, w_idx, w_val)
    widths = dict(index_bits=w_idx, value_bits=w_val)
    out = {
        "syncmesh": ArchConfig.sync_mesh(n_synch, round_len, **widths),
        "fpic-same-bw": ArchConfig.fpic(k_bw, name="fpic-same-bw", **widths),
        "fpic-same-buffer": None,
        "conventional": ArchConfig.conventional(n_conv, **widths),
    }
    if k_buf is None:
        del out["fpic-same-buffer"]
    else:
        out["fpic-same-buffer"] = ArchConfig.fpic(k_buf, name="fpic-same-buffer", **widths)
    return out


_CONFIG_KEYS = {
    "arch": str, "mesh_dim": int, "unit_count": int, "round_len": int,
    "buffer_depth": int, "index_bits": int, "value_bits": int, "name": str,
}


def parse_arch_config(text):
    """Parse ``key = value`` lines (``#`` starts a comment) into an ArchConfig."""
    kw = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        kw[key] = _CONFIG_KEYS[key](value)
    if "arch" not in kw:
        raise ValueError("config must set 'arch'")
    if Arch(kw["arch"]) is Arch.FPIC:
        kw.setdefault("mesh_dim", FPIC_EDGE)
    if "mesh_dim" not in kw:
        raise ValueError("config must set 'mesh_dim'")
    return ArchConfig(**kw)


def load_arch_config(path):
    with open(path) as fh:
        return parse_arch_config(fh.read())


# ------------------------------------------------------ synchronized mesh


def _search_scalar(buffer, key):
    lo, hi, probes = 0, len(buffer), 0
    while lo < hi:
        mid = (lo + hi) // 2
        probes += 1
        k = buffer[mid][0]
        if k == key:
            return True, buffer[mid][1], probes
        if k < key:
            lo = mid + 1
        else:
            hi = mid
    return False, 0.0, probes


def sync_node_step(state, a_op, b_op, depth):
    """Advance one node by one cycle.

    ``a_op``/``b_op`` are ``(index, value)`` pairs, or ``None`` once that
    stream is exhausted for the round (an index of +infinity). Mutates and
    returns ``state``.
    """
    ai, av = a_op if a_op is not None else (math.inf, 0.0)
    bi, bv = b_op if b_op is not None else (math.inf, 0.0)
    if a_op is None and b_op is None:
        return state

    if ai == bi:
        state.acc += av * bv
        state.mac_ops += 1
        state.reset()
        return state

    if ai > bi:
        mine, key, kval, live, other = FLAG_A, bi, bv, a_op, ai
    else:
        mine, key, kval, live, other = FLAG_B, ai, av, b_op, bi
    if state.flag == mine:
        matched, val, probes = _search_scalar(state.buffer, key)
        state.searches += 1
        state.max_comparisons = max(state.max_comparisons, probes)
        if probes > _log2_ceil(depth):
            raise SimulationError(f"buffer search took {probes} comparisons with depth {depth}")
        if matched:
            state.acc += val * kval
            state.mac_ops += 1
    else:
        state.reset()
        state.flag = mine if live is not None else UNSET
    if live is not None:
        if len(state.buffer) >= depth:
            raise SimulationError(f"operand buffer overflow (depth {depth})")
        if state.buffer and state.buffer[-1][0] >= other:
            raise SimulationError("operand buffer indices must increase")
        state.buffer.append(live)
        state.high_water = max(state.high_water, len(state.buffer))
    return state


def _log2_ceil(n):
    return math.ceil(math.log2(n)) if n > 1 else 0


def _window_bounds(m, width, nrounds):
    """``bounds[i, k]``: offset of the first nonzero of row ``i`` with index >= k*width."""
    keys = np.repeat(np.arange(m.rows, dtype=np.int64), m.row_nnz()) * m.cols + m.col_indices
    edges = np.minimum(np.arange(nrounds + 1, dtype=np.int64) * width, m.cols)
    return np.searchsorted(keys, np.arange(m.rows, dtype=np.int64)[:, None] * m.cols + edges)


def _streams(m, starts, counts, length):
    """Window streams for several rows, padded with the +inf sentinel."""
    lane = np.arange(length)
    valid = lane < counts[:, None]
    pos = np.where(valid, starts[:, None] + lane, 0)
    if m.nnz:
        idx = np.where(valid, m.col_indices[np.minimum(pos, m.nnz - 1)], _INF)
        val = np.where(valid, m.values[np.minimum(pos, m.nnz - 1)], 0.0)
    else:
        idx = np.full(valid.shape, _INF)
        val = np.zeros(valid.shape)
    return idx, val


class _SyncTile:
    """Lockstep state of every node in one tile of the synchronized mesh."""

    def __init__(self, tr, tc, depth):
        self.depth = depth
        self.max_probes = _log2_ceil(depth)
        self.acc = np.zeros((tr, tc))
        self.flag = np.zeros((tr, tc), dtype=np.int8)
        self.blen = np.zeros((tr, tc), dtype=np.int64)
        self.bidx = np.full((tr, tc, depth), _INF, dtype=np.int64)
        self.bval = np.zeros((tr, tc, depth))
        self.consumed = np.zeros((tr, tc), dtype=np.int64)
        self.mac_ops = 0
        self.searches = 0
        self.max_comparisons = 0
        self.high_water = 0

    def new_round(self):
        self.blen[:] = 0
        self.flag[:] = UNSET
        self.consumed[:] = 0

    def step(self, a_idx, a_val, b_idx, b_val):
        A, Av = a_idx[:, None], a_val[:, None]
        B, Bv = b_idx[None, :], b_val[None, :]
        a_live, b_live = A != _INF, B != _INF
        flag = self.flag

        eq = (A == B) & a_live
        gt = A > B
        lt = A < B
        g_search = gt & (flag == FLAG_A)
        l_search = lt & (flag == FLAG_B)
        g_reset = gt & ~g_search
        l_reset = lt & ~l_search

        if eq.any():
            self.acc[eq] += np.broadcast_to(Av * Bv, eq.shape)[eq]
            self.mac_ops += int(eq.sum())
            self.blen[eq] = 0
            flag[eq] = UNSET

        search = g_search | l_search
        if search.any():
            rr, cc = np.nonzero(search)
            from_b = g_search[rr, cc]
            keys = np.where(from_b, b_idx[cc], a_idx[rr])
            other = np.where(from_b, b_val[cc], a_val[rr])
            found, pos, probes = self._search(rr, cc, keys)
            self.searches += len(rr)
            worst = int(probes.max())
            if worst > self.max_probes:
                raise SimulationError(
                    f"buffer search took {worst} comparisons with depth {self.depth}"
                )
            self.max_comparisons = max(self.max_comparisons, worst)
            if found.any():
                fr, fc = rr[found], cc[found]
                self.acc[fr, fc] += self.bval[fr, fc, pos[found]] * other[found]
                self.mac_ops += int(found.sum())

        self.blen[g_reset | l_reset] = 0
        flag[g_reset] = np.broadcast_to(np.where(a_live, FLAG_A, UNSET), gt.shape)[g_reset]
        flag[l_reset] = np.broadcast_to(np.where(b_live, FLAG_B, UNSET), lt.shape)[l_reset]

        self._push(gt & a_live, np.broadcast_to(A, gt.shape), np.broadcast_to(Av, gt.shape))
        self._push(lt & b_live, np.broadcast_to(B, lt.shape), np.broadcast_to(Bv, lt.shape))
        self.consumed += 1

    def _search(self, rr, cc, keys):
        buf = self.bidx[rr, cc]
        n = len(rr)
        lo = np.zeros(n, dtype=np.int64)
        hi = self.blen[rr, cc].copy()
        pos = np.zeros(n, dtype=np.int64)
        found = np.zeros(n, dtype=bool)
        probes = np.zeros(n, dtype=np.int64)
        active = lo < hi
        lanes = np.arange(n)
        while active.any():
            mid = (lo + hi) // 2
            v = buf[lanes, np.minimum(mid, self.depth - 1)]
            probes += active
            hit = active & (v == keys)
            found |= hit
            pos = np.where(hit, mid, pos)
            lo = np.where(active & (v < keys), mid + 1, lo)
            hi = np.where(active & (v > keys), mid, hi)
            active &= ~hit & (lo < hi)
        return found, pos, probes

    def _push(self, mask, idx, val):
        if not mask.any():
            return
        rr, cc = np.nonzero(mask)
        slot = self.blen[rr, cc]
        if slot.max() >= self.depth:
            raise SimulationError(f"operand buffer overflow (depth {self.depth})")
        keys = idx[rr, cc]
        prev = slot > 0
        if np.any(self.bidx[rr[prev], cc[prev], slot[prev] - 1] >= keys[prev]):
            raise SimulationError("operand buffer indices must increase")
        self.bidx[rr, cc, slot] = keys
        self.bval[rr, cc, slot] = val[rr, cc]
        self.blen[rr, cc] = slot + 1
        self.high_water = max(self.high_water, int(slot.max()) + 1)


def _check_operands(a, b):
    if a.cols != b.rows:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")


def _require(cfg, arch):
    if cfg.arch is not arch:
        raise ValueError(f"expected a {arch.value} config, got {cfg.arch.value}")


def _csr_from_tiles(rows, cols, pieces):
    if pieces:
        r = np.concatenate([p[0] for p in pieces])
        c = np.concatenate([p[1] for p in pieces])
        v = np.concatenate([p[2] for p in pieces])
    else:
        r = c = np.zeros(0, dtype=np.int64)
        v = np.zeros(0)
    keep = v != 0.0
    return coo_to_csr(CooMatrix(rows, cols, r[keep], c[keep], v[keep]))


def run_sync_mesh(a, b, cfg, check_nodes=False):
    """Simulate ``a @ b`` on the synchronized comparator mesh.

    The output is tiled into ``mesh_dim x mesh_dim`` blocks. Within a tile,
    round ``k`` streams the nonzeros with index in ``[k*R, (k+1)*R)``; the
    round lasts as long as its longest row or column stream, shorter
    streams being padded with an exhausted-stream sentinel. With
    ``check_nodes`` every node's accumulator is compared against an
    independent merge of its full row and column.
    """
    _require(cfg, Arch.SYNC)
    _check_operands(a, b)
    T, R, depth = cfg.mesh_dim, cfg.round_len, cfg.buffer_depth
    M, K, N = a.rows, a.cols, b.cols
    bt = b.transpose()
    nrounds = -(-K // R)
    a_bounds = _window_bounds(a, R, nrounds)
    b_bounds = _window_bounds(bt, R, nrounds)
    skew = 2 * T - 2

    per_round, pieces = [], []
    mac_ops = searches = max_cmp = high_water = 0
    tiles = 0
    for r0 in range(0, M, T):
        r1 = min(r0 + T, M)
        for c0 in range(0, N, T):
            c1 = min(c0 + T, N)
            tiles += 1
            tile = _SyncTile(r1 - r0, c1 - c0, depth)
            for k in range(nrounds):
                na = a_bounds[r0:r1, k + 1] - a_bounds[r0:r1, k]
                nb = b_bounds[c0:c1, k + 1] - b_bounds[c0:c1, k]
                length = int(max(na.max(initial=0), nb.max(initial=0)))
                per_round.append(length)
                if length == 0 or not na.any() or not nb.any():
                    # a side with nothing to offer leaves every node idle
                    continue
                a_idx, a_val = _streams(a, a_bounds[r0:r1, k], na, length)
                b_idx, b_val = _streams(bt, b_bounds[c0:c1, k], nb, length)
                tile.new_round()
                for t in range(length):
                    tile.step(a_idx[:, t], a_val[:, t], b_idx[:, t], b_val[:, t])
                if np.any(tile.consumed != length):
                    raise SimulationError("a node skipped an operand pair within a round")
            mac_ops += tile.mac_ops
            searches += tile.searches
            max_cmp = max(max_cmp, tile.max_comparisons)
            high_water = max(high_water, tile.high_water)
            if check_nodes:
                _check_tile(a, bt, r0, c0, tile.acc)
            rr, cc = np.nonzero(tile.acc)
            pieces.append((rr + r0, cc + c0, tile.acc[rr, cc]))

    unit = sum(per_round)
    total = unit + skew * tiles
    return SimReport(
        arch=cfg.name, config=cfg, total_cycles=float(total), unit_cycles=total,
        per_round_cycles=per_round, skew_cycles=skew * tiles,
        buffer_high_water=high_water, mac_ops=mac_ops,
        resources=resource_account(cfg), result=_csr_from_tiles(M, N, pieces),
        buffer_searches=searches, max_search_comparisons=max_cmp, stall_cycles=0,
    )


def _check_tile(a, bt, r0, c0, acc):
    for r in range(acc.shape[0]):
        ai, av = a.row(r0 + r)
        va = SparseVector(ai.tolist(), av.tolist())
        for c in range(acc.shape[1]):
            bi, bv = bt.row(c0 + c)
            expected = sparse_dot_alg1(va, SparseVector(bi.tolist(), bv.tolist())).value
            if acc[r, c] != expected:
                raise SimulationError(
                    f"node ({r0 + r}, {c0 + c}) accumulated {acc[r, c]}, merge gives {expected}"
                )


# ------------------------------------------------------------------ FPIC


def _padded_rows(m):
    """Rows of ``m`` as a dense (rows, width) index/value grid padded with +inf."""
    counts = m.row_nnz()
    width = max(int(counts.max(initial=0)), 1)
    idx = np.full((m.rows, width), _INF, dtype=np.int64)
    val = np.zeros((m.rows, width))
    if m.nnz:
        row = np.repeat(np.arange(m.rows), counts)
        lane = np.arange(m.nnz) - np.repeat(m.row_ptr[:-1], counts)
        idx[row, lane] = m.col_indices
        val[row, lane] = m.values
    return idx, val, counts


def run_fpic(a, b, cfg):
    """Simulate ``a @ b`` on ``unit_count`` FPIC units.

    All 64 nodes of a unit merge their own row/column pair one comparison
    per cycle; a tile is done when its slowest node is. Tile latencies are
    summed for one unit and divided by ``unit_count``.
    """
    _require(cfg, Arch.FPIC)
    _check_operands(a, b)
    E = FPIC_EDGE
    M, N = a.rows, b.cols
    bt = b.transpose()
    a_idx, a_val, la = _padded_rows(a)
    b_idx, b_val, lb = _padded_rows(bt)
    n_ct = -(-N // E)
    col_lane = np.arange(N)[None, :]

    tile_cycles, pieces = [], []
    mac_ops = 0
    for r0 in range(0, M, E):
        r1 = min(r0 + E, M)
        ra, rv = a_idx[r0:r1], a_val[r0:r1]
        shape = (r1 - r0, N)
        pa = np.zeros(shape, dtype=np.int64)
        pb = np.zeros(shape, dtype=np.int64)
        acc = np.zeros(shape)
        cycles = np.zeros(shape, dtype=np.int64)
        len_a, len_b = la[r0:r1, None], lb[None, :]
        while True:
            active = (pa < len_a) & (pb < len_b)
            if not active.any():
                break
            ai = np.take_along_axis(ra, np.minimum(pa, ra.shape[1] - 1), axis=1)
            bi = b_idx[col_lane, np.minimum(pb, b_idx.shape[1] - 1)]
            eq = active & (ai == bi)
            gt = active & (ai > bi)
            lt = active & (ai < bi)
            if eq.any():
                av = np.take_along_axis(rv, np.minimum(pa, rv.shape[1] - 1), axis=1)
                bv = b_val[col_lane, np.minimum(pb, b_val.shape[1] - 1)]
                acc[eq] += av[eq] * bv[eq]
                mac_ops += int(eq.sum())
            pa += eq | lt
            pb += eq | gt
            cycles += active
        padded = np.zeros((r1 - r0, n_ct * E), dtype=np.int64)
        padded[:, :N] = cycles
        tile_cycles.extend(padded.reshape(r1 - r0, n_ct, E).max(axis=(0, 2)).tolist())
        rr, cc = np.nonzero(acc)
        pieces.append((rr + r0, cc, acc[rr, cc]))

    unit = int(sum(tile_cycles))
    return SimReport(
        arch=cfg.name, config=cfg, total_cycles=unit / cfg.unit_count, unit_cycles=unit,
        per_round_cycles=tile_cycles, skew_cycles=0, buffer_high_water=0,
        mac_ops=mac_ops, resources=resource_account(cfg),
        result=_csr_from_tiles(M, N, pieces),
    )


# ---------------------------------------------------------- conventional


def conventional_cycles(M, N, K, n_conv):
    """Closed-form latency of the dense mesh: tiles x (K + 2*n_conv - 2)."""
    tiles = -(-M // n_conv) * -(-N // n_conv)
    return tiles * (K + 2 * n_conv - 2)


def run_conventional(a, b, cfg):
    """Simulate ``a @ b`` on an output-stationary dense systolic mesh.

    Node ``(r, c)`` sees operand ``k`` at cycle ``r + c + k``, so a tile
    drains after ``K + 2*mesh_dim - 2`` cycles regardless of sparsity.
    """
    _require(cfg, Arch.CONVENTIONAL)
    _check_operands(a, b)
    T = cfg.mesh_dim
    M, K, N = a.rows, a.cols, b.cols
    A, B = a.to_dense(), b.to_dense()
    r = np.arange(T)[:, None]
    c = np.arange(T)[None, :]

    tile_cycles, pieces = [], []
    mac_ops = 0
    for r0 in range(0, M, T):
        r1 = min(r0 + T, M)
        for c0 in range(0, N, T):
            c1 = min(c0 + T, N)
            a_blk = np.zeros((T, max(K, 1)))
            b_blk = np.zeros((max(K, 1), T))
            a_blk[: r1 - r0, :K] = A[r0:r1]
            b_blk[:K, : c1 - c0] = B[:, c0:c1]
            acc = np.zeros((T, T))
            cycles = 0
            for t in range(K + 2 * T - 2):
                k = t - r - c
                live = (k >= 0) & (k < K)
                kk = np.clip(k, 0, max(K - 1, 0))
                acc += np.where(live, a_blk[r, kk] * b_blk[kk, c], 0.0)
                mac_ops += int(live[: r1 - r0, : c1 - c0].sum())
                cycles += 1
            tile_cycles.append(cycles)
            blk = acc[: r1 - r0, : c1 - c0]
            rr, cc = np.nonzero(blk)
            pieces.append((rr + r0, cc + c0, blk[rr, cc]))

    total = int(sum(tile_cycles))
    if total != conventional_cycles(M, N, K, T):
        raise SimulationError("dense mesh cycle count disagrees with its closed form")
    return SimReport(
        arch=cfg.name, config=cfg, total_cycles=float(total), unit_cycles=total,
        per_round_cycles=tile_cycles, skew_cycles=0, buffer_high_water=0,
        mac_ops=mac_ops, resources=resource_account(cfg),
        result=_csr_from_tiles(M, N, pieces),
    )


def run_arch(a, b, cfg, **kw):
    """Dispatch to the simulator matching ``cfg.arch``."""
    if cfg.arch is Arch.SYNC:
        return run_sync_mesh(a, b, cfg, **kw)
    if cfg.arch is Arch.FPIC:
        return run_fpic(a, b, cfg)
    return run_conventional(a, b, cfg)
