import numpy as np
import pytest

from sparsemesh.matrix import csr_from_dense

_ACCEPTANCE_LINES = []


def random_int_matrix(rng, rows, cols, density):
    """Dense integer matrix in [-8, 8] with roughly ``density`` nonzeros."""
    a = rng.integers(-8, 9, size=(rows, cols)).astype(np.float64)
    if density < 1.0:
        a[rng.random((rows, cols)) >= density] = 0.0
    return a


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def sparse_pair(rng):
    def make(m, k, n, density):
        a = random_int_matrix(rng, m, k, density)
        b = random_int_matrix(rng, k, n, density)
        return a, b, csr_from_dense(a), csr_from_dense(b)

    return make


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
