import numpy as np
import pytest

from sparsemesh.matrix import coo_to_csr, matrix_stats
from sparsemesh.synth import PROFILES, SynthProfile, generate_synthetic, parse_profile


def test_full_density_is_dense():
    m = coo_to_csr(generate_synthetic(SynthProfile.uniform(10, 10, 1.0, seed=3)))
    assert m.nnz == 100
    assert np.all(m.to_dense() != 0)


def test_docword_mean_row_count():
    s = matrix_stats(coo_to_csr(generate_synthetic(PROFILES["docword"])))
    assert 432 <= s.nz_mean <= 528
    assert 2 <= s.nz_min and s.nz_max <= 906


@pytest.mark.parametrize("name", sorted(PROFILES))
def test_presets_respect_profile(name):
    p = PROFILES[name].with_rows(60)
    s = matrix_stats(coo_to_csr(generate_synthetic(p)))
    lo, mean, hi = p.nz_per_row
    assert lo <= s.nz_min and s.nz_max <= hi
    assert abs(s.nz_mean - mean) <= 0.1 * mean


def test_deterministic():
    p = SynthProfile.uniform(40, 70, 0.1, seed=11)
    a, b = generate_synthetic(p), generate_synthetic(p)
    assert a.triplets() == b.triplets()
    assert generate_synthetic(p.with_seed(12)).triplets() != a.triplets()


def test_values_nonzero_integers():
    m = generate_synthetic(SynthProfile.uniform(30, 30, 0.5, seed=1))
    assert np.all(m.val != 0)
    assert np.all(np.abs(m.val) <= 8)
    assert np.all(m.val == np.round(m.val))


def test_infeasible_profile():
    with pytest.raises(ValueError, match="infeasible"):
        SynthProfile(5, 10, 1.0, (0, 11, 12))


def test_inconsistent_mean_rejected():
    # Mks: listed average 150 vs 7500 * 1.5% = 112.5
    with pytest.raises(ValueError, match="disagrees"):
        SynthProfile(3500, 7500, 0.015, (18, 150, 957))


def test_parse_profile():
    p = parse_profile("20,30,0.1,5")
    assert (p.rows, p.cols, p.target_density, p.seed) == (20, 30, 0.1, 5)
    assert parse_profile("amazon", seed=9, rows=10).rows == 10
    with pytest.raises(ValueError):
        parse_profile("1,2")
