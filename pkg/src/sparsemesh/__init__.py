"""InCRS sparse storage, instrumented SpMM kernels and systolic SpMM mesh simulators."""

__version__ = "0.1.0"

from .incrs import (
    AccessCounter,
    InCrsConfig,
    InCrsMatrix,
    build_incrs,
    csr_get,
    gather_column,
    incrs_get,
    ma_ratio_estimate,
    measured_ma_ratio,
    storage_ratio_estimate,
    table1_cost,
)
from .matrix import (
    CcsMatrix,
    CooMatrix,
    CsrMatrix,
    coo_to_csr,
    csr_from_dense,
    csr_to_ccs,
    csr_to_coo,
    dense_matmul,
    matrix_stats,
)
from .mesh import (
    ArchConfig,
    SimReport,
    parity_sizing,
    resource_account,
    run_conventional,
    run_fpic,
    run_sync_mesh,
    table5_configs,
)
from .mmio import load_matrix_market, save_matrix_market
from .spmm import SparseVector, sparse_dot_alg1, spmm, spmm_a_at
from .synth import PROFILES, SynthProfile, generate_synthetic
