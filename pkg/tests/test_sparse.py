import threading

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from saishift.sparse import (
    FactorizationError,
    SparseMatrix,
    csr_from_triplets,
    from_scipy,
    lu_solve,
    read_matrix_market,
    shifted_lu,
    spmv,
    write_matrix_market,
)


def laplacian_1d(n):
    trip = [(i, i, 2.0) for i in range(n)]
    trip += [(i, i + 1, -1.0) for i in range(n - 1)]
    trip += [(i + 1, i, -1.0) for i in range(n - 1)]
    return csr_from_triplets(n, trip)


def laplacian_2d(n):
    L = laplacian_1d(n).toarray()
    I = np.eye(n)
    return from_scipy(np.kron(I, L) + np.kron(L, I))


def test_identity_from_triplets():
    A = csr_from_triplets(2, [(0, 0, 1.0), (1, 1, 1.0)])
    np.testing.assert_array_equal(A.toarray(), np.eye(2))


def test_duplicates_are_summed():
    A = csr_from_triplets(2, [(0, 1, 3.0), (0, 1, 4.0)])
    assert A.nnz == 1
    assert A.toarray()[0, 1] == 7.0


def test_laplacian_row_pointer():
    # rows hold 2, 3, 2 entries
    A = laplacian_1d(3)
    np.testing.assert_array_equal(A.row_ptr, [0, 2, 5, 7])
    np.testing.assert_array_equal(A.col_idx, [0, 1, 0, 1, 2, 1, 2])


@pytest.mark.parametrize("bad", [(2, 0, 1.0), (0, -1, 1.0), (0, 5, 1.0)])
def test_out_of_range_triplet(bad):
    with pytest.raises(ValueError):
        csr_from_triplets(2, [bad])


def test_invariants_enforced():
    with pytest.raises(ValueError):
        SparseMatrix(2, 2, [0, 2, 2], [1, 0], [1.0, 1.0])  # unsorted row
    with pytest.raises(ValueError):
        SparseMatrix(2, 2, [0, 1], [0], [1.0])  # short row_ptr
    with pytest.raises(ValueError):
        SparseMatrix(2, 2, [0, 2, 1], [0, 1], [1.0, 1.0])


def test_arrays_are_read_only():
    A = laplacian_1d(3)
    with pytest.raises(ValueError):
        A.values[0] = 5.0


def test_spmv_examples():
    x = np.array([1.0, -2.0, 3.5])
    np.testing.assert_array_equal(spmv(SparseMatrix.identity(3), x), x)
    np.testing.assert_array_equal(spmv(laplacian_1d(3), np.ones(3)), [1.0, 0.0, 1.0])
    np.testing.assert_array_equal(spmv(SparseMatrix.zeros(3), x), np.zeros(3))
    with pytest.raises(ValueError):
        spmv(laplacian_1d(3), np.ones(4))


def test_spmv_matches_dense_multiply():
    rng = np.random.default_rng(3)
    M = rng.standard_normal((7, 7)) * (rng.random((7, 7)) < 0.4)
    x = rng.standard_normal(7)
    np.testing.assert_allclose(spmv(from_scipy(M), x), M @ x, rtol=1e-14, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(
    st.integers(min_value=0, max_value=2**32 - 1),
    st.floats(-10, 10),
    st.floats(-10, 10),
)
def test_spmv_is_linear(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((6, 6)) * (rng.random((6, 6)) < 0.5)
    A = from_scipy(M)
    x, y = rng.standard_normal((2, 6))
    lhs = spmv(A, alpha * x + beta * y)
    rhs = alpha * spmv(A, x) + beta * spmv(A, y)
    scale = np.abs(M).sum() * (abs(alpha) * np.abs(x).max() + abs(beta) * np.abs(y).max()) + 1.0
    assert np.max(np.abs(lhs - rhs)) <= 1e-14 * scale


def test_lu_trivial_cases():
    b = np.array([3.0, -1.0, 2.0, 5.0])
    f = shifted_lu(SparseMatrix.zeros(4), 1.0)
    np.testing.assert_array_equal(lu_solve(f, b), b)
    f = shifted_lu(SparseMatrix.identity(4), 1.0)
    np.testing.assert_allclose(lu_solve(f, b), b / 2, rtol=1e-15)
    f = shifted_lu(SparseMatrix.identity(2), 3.0)
    np.testing.assert_allclose(lu_solve(f, [4.0, 8.0]), [1.0, 2.0], rtol=1e-15)
    np.testing.assert_array_equal(lu_solve(f, np.zeros(2)), np.zeros(2))


def test_lu_matches_dense_on_2d_laplacian():
    A = laplacian_2d(4)
    M = np.eye(16) + 0.1 * A.toarray()
    f = shifted_lu(A, 0.1)
    rng = np.random.default_rng(0)
    for _ in range(5):
        b = rng.standard_normal(16)
        ref = scipy.linalg.lu_solve(scipy.linalg.lu_factor(M), b)
        x = lu_solve(f, b)
        assert np.linalg.norm(x - ref) <= 1e-12 * np.linalg.norm(ref)


def test_lu_solve_residual_random_nonsymmetric():
    rng = np.random.default_rng(1)
    M = rng.standard_normal((30, 30)) * (rng.random((30, 30)) < 0.2)
    A = from_scipy(M)
    f = shifted_lu(A, 0.05)
    dense = np.eye(30) + 0.05 * M
    for _ in range(10):
        b = rng.standard_normal(30)
        x = lu_solve(f, b)
        assert np.linalg.norm(dense @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_lu_does_not_modify_matrix():
    A = laplacian_2d(4)
    before = A.values.copy()
    shifted_lu(A, 0.3)
    np.testing.assert_array_equal(A.values, before)


def test_lu_reuse_is_bitwise_stable():
    A = laplacian_2d(5)
    b = np.random.default_rng(2).standard_normal(25)
    f = shifted_lu(A, 0.2)
    repeated = [lu_solve(f, b) for _ in range(4)]
    fresh = [lu_solve(shifted_lu(A, 0.2), b) for _ in range(4)]
    for x, y in zip(repeated, fresh):
        np.testing.assert_array_equal(x, y)
    assert f.n_solves == 4


def test_lu_concurrent_solves_agree():
    A = laplacian_2d(6)
    f = shifted_lu(A, 0.1)
    rng = np.random.default_rng(5)
    rhs = rng.standard_normal((8, 36))
    expected = [lu_solve(f, b) for b in rhs]
    results = [None] * 8

    def work(k):
        results[k] = lu_solve(f, rhs[k])

    threads = [threading.Thread(target=work, args=(k,)) for k in range(8)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    for x, y in zip(results, expected):
        np.testing.assert_array_equal(x, y)


def test_singular_shift_raises():
    # I + 1*(-I) is the zero matrix
    A = from_scipy(-np.eye(3))
    with pytest.raises(FactorizationError):
        shifted_lu(A, 1.0)


def test_lu_argument_checks():
    with pytest.raises(ValueError):
        shifted_lu(SparseMatrix.identity(2), 0.0)
    f = shifted_lu(SparseMatrix.identity(2), 1.0)
    with pytest.raises(ValueError):
        lu_solve(f, np.ones(3))


def test_matrix_market_round_trip(tmp_path):
    A = laplacian_2d(3)
    path = tmp_path / "lap.mtx"
    write_matrix_market(path, A)
    B = read_matrix_market(path)
    np.testing.assert_array_equal(B.row_ptr, A.row_ptr)
    np.testing.assert_array_equal(B.col_idx, A.col_idx)
    np.testing.assert_array_equal(B.values, A.values)
    assert path.read_text().startswith("%%MatrixMarket matrix coordinate real")
