"""The seven acceptance criteria, each at its stated tolerance.

Every test records a one-line PASS/FAIL verdict that is printed in the
terminal summary under "acceptance criteria".
"""

import math

import numpy as np
import pytest

from conftest import random_int_matrix
from sparsemesh.incrs import build_incrs, ma_ratio_estimate, measured_ma_ratio, storage_ratio_estimate
from sparsemesh.matrix import coo_to_csr, csr_from_dense, dense_matmul
from sparsemesh.mesh import (
    ArchConfig,
    parity_sizing,
    resource_account,
    run_conventional,
    run_fpic,
    run_sync_mesh,
    table5_configs,
)
from sparsemesh.spmm import SparseVector, sparse_dot_alg1, spmm, spmm_a_at
from sparsemesh.synth import PROFILES, SynthProfile, generate_synthetic


def verdict(log, number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    log.append(line)
    print(line)
    return ok


def test_criterion_1_formulas(acceptance_log):
    storage = {0.14: 0.99, 0.06: 0.97, 0.04: 0.95, 0.015: 0.88}
    access = {(10_000, 0.14): 42, (22_000, 0.06): 39, (12_000, 0.04): 14}
    got_s = {d: storage_ratio_estimate(d, 256) for d in storage}
    got_a = {k: ma_ratio_estimate(*k, 32) for k in access}
    ok = (all(abs(got_s[d] - v) <= 0.01 for d, v in storage.items())
          and all(abs(got_a[k] - v) <= 1.5 for k, v in access.items()))
    detail = ("storage " + " ".join(f"{g:.3f}" for g in got_s.values())
              + "; access " + " ".join(f"{g:.2f}" for g in got_a.values()))
    assert verdict(acceptance_log, 1, ok, detail)


def test_criterion_2_measured_ratio(acceptance_log):
    parts, ok = [], True
    for name in ("amazon", "docword"):
        p = PROFILES[name]
        m = coo_to_csr(generate_synthetic(p))
        ratio, _, _ = measured_ma_ratio(m, probes=100, seed=0)
        predicted = ma_ratio_estimate(p.cols, m.density, 32)
        ok &= 0.5 <= ratio / predicted <= 2.0
        parts.append(f"{name} {p.rows}x{p.cols} measured {ratio:.1f} vs predicted {predicted:.1f}"
                     f" (x{ratio / predicted:.2f})")
    assert verdict(acceptance_log, 2, ok, "; ".join(parts) + "; allowed x0.5..x2")


def _oracle_cases(n_cases=200, seed=2024):
    rng = np.random.default_rng(seed)
    densities = [0.0, 0.01, 0.05, 0.20, 1.0]
    for case in range(n_cases):
        m, k, n = (int(x) for x in rng.integers(1, 97, size=3))
        d = densities[case % len(densities)]
        a, b = random_int_matrix(rng, m, k, d), random_int_matrix(rng, k, n, d)
        edge = max(m, n)
        sync_dim = int(rng.choice([t for t in (2, 4, 8, 16, 32, 64) if t <= max(edge, 2)]))
        round_len = int(rng.choice([4, 8, 16, 32]))
        units = int(rng.choice([1, 4, 8, 32]))
        conv_dim = int(rng.integers(1, min(edge, 96) + 1))
        yield case, a, b, sync_dim, round_len, units, conv_dim


@pytest.fixture(scope="module")
def oracle_suite():
    mismatches, props, n = [], [], 0
    for case, a, b, T, R, units, conv in _oracle_cases():
        n += 1
        ca, cb = csr_from_dense(a), csr_from_dense(b)
        expected = dense_matmul(a, b)
        sync = run_sync_mesh(ca, cb, ArchConfig.sync_mesh(T, R), check_nodes=True)
        results = {
            "syncmesh": sync.result,
            "fpic": run_fpic(ca, cb, ArchConfig.fpic(units)).result,
            "conventional": run_conventional(ca, cb, ArchConfig.conventional(conv)).result,
            "spmm-crs": spmm(ca, cb),
            "spmm-incrs": spmm(ca, build_incrs(cb)),
        }
        for name, res in results.items():
            if not np.array_equal(res.to_dense(), expected):
                mismatches.append((case, name))
        if not np.array_equal(spmm_a_at(ca).to_dense(), dense_matmul(a, a.T)):
            mismatches.append((case, "spmm_a_at"))
        props.append((case, R, sync.stall_cycles, sync.buffer_high_water,
                      sync.max_search_comparisons, sync.buffer_searches))
    return n, mismatches, props


@pytest.mark.slow
def test_criterion_3_oracle_equivalence(acceptance_log, oracle_suite):
    n, mismatches, _ = oracle_suite
    ok = n >= 200 and not mismatches
    detail = f"{n} cases x 6 kernels, {len(mismatches)} mismatches"
    if mismatches:
        detail += f" (first: case {mismatches[0][0]} {mismatches[0][1]})"
    assert verdict(acceptance_log, 3, ok, detail)


def test_criterion_4_resources(acceptance_log):
    sizing = parity_sizing(64, 16, 32)
    got = {k: resource_account(c) for k, c in table5_configs(64, 32).items()}
    want = {
        "syncmesh": (6, 4096, 768),
        "fpic-same-bw": (6, 512, 192),
        "fpic-same-buffer": (None, 2048, 768),
        "conventional": (6, 9216, 0),
    }
    ok = sizing == (8, 32, 96)
    for name, (bw, macs, kb) in want.items():
        r = got[name]
        ok &= r.mac_units == macs and r.buffer_kB == kb
        ok &= bw is None or r.bandwidth_kb_per_cycle == bw
    detail = f"parity {sizing}; " + "; ".join(
        f"{k} {r.bandwidth_kb_per_cycle:g}kb/c {r.mac_units} MACs {r.buffer_kB:g}kB"
        for k, r in got.items())
    assert verdict(acceptance_log, 4, ok, detail)


@pytest.mark.slow
def test_criterion_5_no_stall_and_buffer_bounds(acceptance_log, oracle_suite):
    _, _, props = oracle_suite
    bad = [p for p in props
           if p[2] != 0 or p[3] > p[1] or p[4] > math.ceil(math.log2(p[1]))]
    worst_hw = max(p[3] / p[1] for p in props)
    searches = sum(p[5] for p in props)
    detail = (f"{len(props)} runs, {searches} buffer searches, {len(bad)} violations, "
              f"peak occupancy {worst_hw:.2f}R")
    assert verdict(acceptance_log, 5, not bad, detail)


@pytest.mark.slow
def test_criterion_6_density_trend(acceptance_log):
    cfgs = table5_configs(64, 32)
    rows = []
    for d in (0.14, 0.04, 0.015, 0.001):
        a = coo_to_csr(generate_synthetic(SynthProfile.uniform(512, 512, d, seed=6)))
        at = a.transpose()
        sync = run_sync_mesh(a, at, cfgs["syncmesh"]).total_cycles
        bw = run_fpic(a, at, cfgs["fpic-same-bw"]).total_cycles
        buf = run_fpic(a, at, cfgs["fpic-same-buffer"]).total_cycles
        rows.append((d, sync, bw, buf))
    speedup = [bw / sync for _, sync, bw, _ in rows]
    ok_a = all(sync < bw for _, sync, bw, _ in rows)
    ok_b = all(x <= y for x, y in zip(speedup, speedup[1:]))
    ok_c = all(sync < buf for _, sync, _, buf in rows[2:])
    detail = (f"(a) {'ok' if ok_a else 'no'} (b) {'ok' if ok_b else 'no'} "
              f"(c) {'ok' if ok_c else 'no'}; " + "; ".join(
                  f"D={d:g}: sync {s:.0f} fpic-bw {b:.0f} fpic-buf {f:.0f} speedup {b / s:.2f}"
                  for d, s, b, f in rows))
    assert verdict(acceptance_log, 6, ok_a and ok_b and ok_c, detail)


def test_criterion_7_fpic_cycle_crosscheck(acceptance_log):
    rng = np.random.default_rng(77)
    bad = 0
    for _ in range(50):
        m, k, n = (int(x) for x in rng.integers(1, 65, size=3))
        d = float(rng.choice([0.01, 0.05, 0.2, 0.5, 1.0]))
        ca = csr_from_dense(random_int_matrix(rng, m, k, d))
        cb = csr_from_dense(random_int_matrix(rng, k, n, d))
        rep = run_fpic(ca, cb, ArchConfig.fpic(1))
        bt = cb.transpose()
        rows = [SparseVector(*(x.tolist() for x in ca.row(i))) for i in range(m)]
        cols = [SparseVector(*(x.tolist() for x in bt.row(j))) for j in range(n)]
        unit = 0
        for r0 in range(0, m, 8):
            for c0 in range(0, n, 8):
                unit += max(sparse_dot_alg1(rows[i], cols[j]).cycles
                            for i in range(r0, min(r0 + 8, m)) for j in range(c0, min(c0 + 8, n)))
        bad += unit != rep.unit_cycles or rep.total_cycles != unit
    assert verdict(acceptance_log, 7, bad == 0, f"50 cases, {bad} disagreements")
