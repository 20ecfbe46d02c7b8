import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_int_matrix
from sparsemesh.matrix import csr_from_dense, dense_matmul
from sparsemesh.mesh import (
    Arch,
    ArchConfig,
    NodeState,
    SimulationError,
    conventional_cycles,
    parity_sizing,
    parse_arch_config,
    resource_account,
    result_checksum,
    run_arch,
    run_conventional,
    run_fpic,
    run_sync_mesh,
    sync_node_step,
    table5_configs,
)
from sparsemesh.spmm import SparseVector, sparse_dot_alg1


def drive(a_stream, b_stream, depth=8):
    """Feed two equal-length-padded streams through one node."""
    n = max(len(a_stream), len(b_stream))
    a = list(a_stream) + [None] * (n - len(a_stream))
    b = list(b_stream) + [None] * (n - len(b_stream))
    state = NodeState()
    for x, y in zip(a, b):
        sync_node_step(state, x, y, depth)
        assert (state.flag == 0) == (not state.buffer)
        assert len(state.buffer) <= depth
    return state


# ------------------------------------------------------------ node step


def test_equal_indices_mac():
    s = sync_node_step(NodeState(), (5, 3.0), (5, 4.0), 4)
    assert s.acc == 12.0 and s.buffer == [] and s.mac_ops == 1


def test_hand_trace_with_padded_a():
    s = NodeState()
    sync_node_step(s, (0, 2.0), (0, 5.0), 4)
    assert s.acc == 10.0
    sync_node_step(s, (2, 3.0), (1, 7.0), 4)
    assert s.flag == 1 and s.buffer == [(2, 3.0)]
    sync_node_step(s, None, (2, 1.0), 4)
    assert s.acc == 13.0
    a = SparseVector((0, 2), (2, 3))
    b = SparseVector((0, 1, 2), (5, 7, 1))
    assert s.acc == sparse_dot_alg1(a, b).value


def test_search_hit_from_buffered_b():
    s = NodeState()
    sync_node_step(s, (3, 2.0), (4, 9.0), 4)
    assert s.flag == 2 and s.buffer == [(4, 9.0)]
    sync_node_step(s, (4, 5.0), None, 4)
    assert s.acc == 45.0 and s.mac_ops == 1
    dense = np.zeros(5), np.zeros(5)
    dense[0][[3, 4]] = [2, 5]
    dense[1][4] = 9
    assert s.acc == dense[0] @ dense[1]


def test_node_overflow_is_reported():
    s = NodeState(buffer=[(5, 1.0), (6, 1.0), (7, 1.0)], flag=1)
    with pytest.raises(SimulationError, match="overflow"):
        sync_node_step(s, (8, 1.0), (1, 1.0), 3)


def test_node_search_bound_is_enforced():
    s = NodeState(buffer=[(5, 1.0), (6, 1.0)], flag=1)
    with pytest.raises(SimulationError, match="comparisons"):
        sync_node_step(s, (8, 1.0), (1, 1.0), 2)


@st.composite
def window_streams(draw, width=16):
    def one():
        idx = sorted(draw(st.sets(st.integers(0, width - 1), max_size=width)))
        return [(i, float(draw(st.integers(1, 8)))) for i in idx]
    return one(), one()


@settings(max_examples=300, deadline=None)
@given(window_streams())
def test_node_matches_merge(streams):
    a, b = streams
    s = drive(a, b, depth=16)
    ref = sparse_dot_alg1(SparseVector.from_pairs(a), SparseVector.from_pairs(b))
    assert s.acc == ref.value
    assert s.high_water <= 16
    assert s.max_comparisons <= math.ceil(math.log2(16))


# ------------------------------------------------------ synchronized mesh


def replay_sync(a, b, T, R):
    """Scalar per-node replay of the round model; returns (acc, mac_ops, high_water, cycles)."""
    A, B = a.to_dense(), b.to_dense()
    M, K = A.shape
    N = B.shape[1]
    acc = np.zeros((M, N))
    macs = hw = cycles = 0
    for r0 in range(0, M, T):
        rows = range(r0, min(r0 + T, M))
        for c0 in range(0, N, T):
            cols = range(c0, min(c0 + T, N))
            cycles += 2 * T - 2
            for k0 in range(0, K, R):
                win = range(k0, min(k0 + R, K))
                sa = {r: [(k, A[r, k]) for k in win if A[r, k]] for r in rows}
                sb = {c: [(k, B[k, c]) for k in win if B[k, c]] for c in cols}
                length = max([len(v) for v in sa.values()] + [len(v) for v in sb.values()])
                cycles += length
                if not any(sa.values()) or not any(sb.values()):
                    continue
                for r in rows:
                    for c in cols:
                        s = NodeState()
                        xa = sa[r] + [None] * (length - len(sa[r]))
                        xb = sb[c] + [None] * (length - len(sb[c]))
                        for x, y in zip(xa, xb):
                            sync_node_step(s, x, y, R)
                        acc[r, c] += s.acc
                        macs += s.mac_ops
                        hw = max(hw, s.high_water)
    return acc, macs, hw, cycles


def test_dense_tile_every_cycle_matches(rng):
    a = random_int_matrix(rng, 4, 4, 1.0)
    a[a == 0] = 1.0
    ca = csr_from_dense(a)
    rep = run_sync_mesh(ca, ca, ArchConfig.sync_mesh(4, 4))
    assert np.array_equal(rep.result.to_dense(), dense_matmul(a, a))
    assert rep.per_round_cycles == [4]
    assert rep.total_cycles == 4 + 6
    assert rep.mac_ops == 64


def test_identity_one_mac_per_diagonal_node():
    eye = csr_from_dense(np.eye(10))
    rep = run_sync_mesh(eye, eye, ArchConfig.sync_mesh(16, 4))
    assert rep.mac_ops == 10
    assert np.array_equal(rep.result.to_dense(), np.eye(10))


@pytest.mark.parametrize("density", [0.01, 0.05, 0.20])
def test_random_64_against_oracle(sparse_pair, density):
    a, b, ca, cb = sparse_pair(64, 64, 64, density)
    rep = run_sync_mesh(ca, cb, ArchConfig.sync_mesh(16, 32), check_nodes=True)
    assert np.array_equal(rep.result.to_dense(), dense_matmul(a, b))
    assert rep.buffer_high_water <= 32
    assert rep.max_search_comparisons <= 5
    assert rep.stall_cycles == 0
    assert rep.total_cycles == sum(rep.per_round_cycles) + rep.skew_cycles
    assert rep.skew_cycles == 16 * 30


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.integers(1, 20), st.integers(1, 12), st.sampled_from([0.1, 0.3, 0.7, 1.0]),
       st.sampled_from([(2, 2), (4, 4), (3, 8), (8, 3)]), st.integers(0, 2**32 - 1))
def test_vectorized_mesh_matches_scalar_replay(m, k, n, density, tr, seed):
    T, R = tr
    r = np.random.default_rng(seed)
    a, b = random_int_matrix(r, m, k, density), random_int_matrix(r, k, n, density)
    ca, cb = csr_from_dense(a), csr_from_dense(b)
    rep = run_sync_mesh(ca, cb, ArchConfig.sync_mesh(T, R))
    acc, macs, hw, cycles = replay_sync(ca, cb, T, R)
    assert np.array_equal(rep.result.to_dense(), acc)
    assert np.array_equal(acc, dense_matmul(a, b))
    assert rep.mac_ops == macs
    assert rep.buffer_high_water == hw
    assert rep.unit_cycles == cycles


def test_sync_rejects_mismatch_and_wrong_config():
    a = csr_from_dense(np.ones((2, 3)))
    with pytest.raises(ValueError, match="mismatch"):
        run_sync_mesh(a, a, ArchConfig.sync_mesh(4, 4))
    with pytest.raises(ValueError, match="syncmesh"):
        run_sync_mesh(a, a.transpose(), ArchConfig.fpic())


# ------------------------------------------------------------------ FPIC


def fpic_reference(a, b):
    """Tile latencies from per-node merges."""
    bt = b.transpose()
    rows = [SparseVector(*map(np.ndarray.tolist, a.row(i))) for i in range(a.rows)]
    cols = [SparseVector(*map(np.ndarray.tolist, bt.row(j))) for j in range(bt.rows)]
    tiles = []
    for r0 in range(0, a.rows, 8):
        for c0 in range(0, b.cols, 8):
            tiles.append(max(sparse_dot_alg1(rows[i], cols[j]).cycles
                             for i in range(r0, min(r0 + 8, a.rows))
                             for j in range(c0, min(c0 + 8, b.cols))))
    return tiles


def test_fpic_unit_scaling(sparse_pair):
    _, _, ca, cb = sparse_pair(40, 50, 30, 0.2)
    one = run_fpic(ca, cb, ArchConfig.fpic(1))
    eight = run_fpic(ca, cb, ArchConfig.fpic(8))
    assert one.total_cycles == 8 * eight.total_cycles
    assert one.checksum == eight.checksum


def test_fpic_dense_tile():
    a = csr_from_dense(np.full((8, 8), 2.0))
    rep = run_fpic(a, a, ArchConfig.fpic())
    assert rep.per_round_cycles == [8]
    assert np.array_equal(rep.result.to_dense(), np.full((8, 8), 32.0))


def test_fpic_random_64(sparse_pair):
    a, b, ca, cb = sparse_pair(64, 64, 64, 0.05)
    rep = run_fpic(ca, cb, ArchConfig.fpic())
    assert np.array_equal(rep.result.to_dense(), dense_matmul(a, b))
    tiles = fpic_reference(ca, cb)
    assert len(tiles) == 64
    assert rep.per_round_cycles == tiles
    assert rep.unit_cycles == sum(tiles)


def test_fpic_config_fixed_edge():
    with pytest.raises(ValueError, match="8x8"):
        ArchConfig(Arch.FPIC, 16)


# ---------------------------------------------------------- conventional


def test_conventional_single_tile():
    a = csr_from_dense(np.eye(4))
    rep = run_conventional(a, a, ArchConfig.conventional(4))
    assert rep.total_cycles == 10
    assert np.array_equal(rep.result.to_dense(), np.eye(4))


@pytest.mark.parametrize("density", [0.0, 0.05, 1.0])
def test_conventional_oracle(sparse_pair, density):
    a, b, ca, cb = sparse_pair(23, 17, 30, density)
    rep = run_conventional(ca, cb, ArchConfig.conventional(8))
    assert np.array_equal(rep.result.to_dense(), dense_matmul(a, b))
    assert rep.total_cycles == conventional_cycles(23, 30, 17, 8)


def test_conventional_large_arithmetic():
    assert conventional_cycles(3600, 3600, 3600, 96) == 38 * 38 * 3790


# ---------------------------------------------------------------- sizing


def test_parity_sizing():
    assert parity_sizing(64, 16, 32) == (8, 32, 96)
    assert parity_sizing(8) == (1, None, 12)
    assert parity_sizing(16)[1] == 2
    with pytest.raises(ValueError):
        parity_sizing(12)
    with pytest.raises(ValueError):
        parity_sizing(16, 16, 24)
    assert "fpic-same-buffer" not in table5_configs(8)


def test_resource_accounting():
    cfgs = table5_configs(64, 32)
    got = {k: resource_account(c) for k, c in cfgs.items()}
    assert (got["syncmesh"].mac_units, got["syncmesh"].buffer_kB,
            got["syncmesh"].bandwidth_kb_per_cycle) == (4096, 768, 6)
    assert (got["fpic-same-bw"].mac_units, got["fpic-same-bw"].buffer_kB,
            got["fpic-same-bw"].bandwidth_kb_per_cycle) == (512, 192, 6)
    assert (got["fpic-same-buffer"].mac_units, got["fpic-same-buffer"].buffer_kB) == (2048, 768)
    assert (got["conventional"].mac_units, got["conventional"].buffer_kB) == (9216, 0)
    assert got["conventional"].bandwidth_kb_per_cycle == 6


def test_sync_config_requires_round_depth():
    with pytest.raises(ValueError, match="round_len"):
        ArchConfig(Arch.SYNC, 16, round_len=32, buffer_depth=16)
    with pytest.raises(ValueError):
        ArchConfig(Arch.CONVENTIONAL, 8, unit_count=2)


def test_parse_config():
    cfg = parse_arch_config("# FPIC with 4 units\narch = fpic\nunit_count = 4\nname = f4\n")
    assert cfg == ArchConfig.fpic(4, name="f4")
    cfg = parse_arch_config("arch=syncmesh\nmesh_dim=32\nround_len=16\n")
    assert cfg.buffer_depth == 16
    with pytest.raises(ValueError, match="unknown key"):
        parse_arch_config("arch=fpic\ncolour=red\n")
    with pytest.raises(ValueError, match="mesh_dim"):
        parse_arch_config("arch=conventional\n")


def test_report_json_and_checksums(sparse_pair):
    _, _, ca, cb = sparse_pair(20, 30, 25, 0.2)
    reps = [run_arch(ca, cb, c) for c in table5_configs(8, 8).values()]
    assert len({r.checksum for r in reps}) == 1
    doc = json.loads(json.dumps(reps[0].to_json_dict()))
    for key in ("total_cycles", "per_round_cycles", "buffer_high_water", "mac_ops",
                "resources", "checksum"):
        assert key in doc
    assert doc["checksum"] == result_checksum(reps[0].result)
