"""
Sparse linear algebra tests
Covers spmv, the ILU(0) factorization and preconditioned BiCGSTAB
"""

import numpy as np
import scipy.sparse as sp

from runner import expect_raises, run_tests
from models.kou_model import KouParams
from utils.fd_operator import assemble_AD
from utils.sparse_linalg import SolverError, ZeroPivotError, bicgstab, ilu0, spmv
from utils.spatial_grid import build_grid


def _tridiagonal(n=30):
    return sp.diags([-1.0 * np.ones(n - 1), 4.0 * np.ones(n), -1.0 * np.ones(n - 1)],
                    [-1, 0, 1], format='csr')


def _stage_matrix(m=10, theta_dt=0.01):
    params = KouParams()
    grid = build_grid(m, params.K, 10.0 * params.K)
    A = assemble_AD(grid, params)
    C = sp.identity(grid.size, format='csr') - theta_dt * A
    d = grid.boundary_mask().astype(float)
    C = sp.diags(1.0 - d) @ C + sp.diags(d)
    return sp.csr_matrix(C)


def test_spmv():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [0.0, 3.0]]))
    assert np.array_equal(spmv(A, np.array([1.0, 1.0])), [3.0, 3.0])
    assert np.array_equal(spmv(A, np.zeros(2)), [0.0, 0.0])
    assert np.array_equal(spmv(sp.identity(3, format='csr'), np.array([1.0, 2.0, 3.0])), [1.0, 2.0, 3.0])
    expect_raises(ValueError, spmv, A, np.ones(3))


def test_spmv_row_sums():
    A = sp.random(40, 40, density=0.1, format='csr', random_state=4)
    assert np.allclose(spmv(A, np.ones(40)), np.asarray(A.sum(axis=1)).ravel())


def test_ilu0_is_exact_on_tridiagonal():
    A = _tridiagonal()
    factors = ilu0(A)
    assert np.allclose((factors.L @ factors.U).toarray(), A.toarray(), atol=1e-14)
    b = np.arange(30, dtype=float)
    x, report = bicgstab(A, b, precond=factors)
    assert report.iterations <= 1
    assert np.allclose(A @ x, b)


def test_ilu0_diagonal():
    A = sp.diags(np.array([2.0, 4.0, 8.0]), format='csr')
    factors = ilu0(A)
    assert np.allclose(factors.solve(np.array([2.0, 4.0, 8.0])), [1.0, 1.0, 1.0])


def test_ilu0_zero_pivot():
    # explicit stored zero on the diagonal
    A = sp.csr_matrix((np.array([0.0, 1.0, 1.0, 1.0]), np.array([0, 1, 0, 1]), np.array([0, 2, 4])),
                      shape=(2, 2))
    error = expect_raises(ZeroPivotError, ilu0, A)
    assert error.row == 0
    missing = sp.csr_matrix(np.array([[1.0, 0.0], [1.0, 0.0]]))
    assert expect_raises(ZeroPivotError, ilu0, missing).row == 1
    expect_raises(ValueError, ilu0, sp.csr_matrix(np.ones((2, 3))))


def test_ilu0_keeps_pattern():
    C = _stage_matrix()
    factors = ilu0(C)
    assert factors.to_csr().nnz == sp.csr_matrix(C).nnz


def test_preconditioned_stage_solve():
    C = _stage_matrix()
    b = np.random.default_rng(2).random(C.shape[0])
    x, report = bicgstab(C, b, precond=ilu0(C), rel_tol=1e-10)
    assert report.converged and report.iterations <= 30
    assert np.linalg.norm(b - C @ x) <= 1e-10 * np.linalg.norm(b)
    assert np.isclose(report.residual, np.linalg.norm(b - C @ x) / np.linalg.norm(b))


def test_trivial_systems():
    A = _tridiagonal(10)
    x, report = bicgstab(A, np.zeros(10))
    assert np.array_equal(x, np.zeros(10)) and report.iterations == 0
    b = np.linspace(1.0, 2.0, 10)
    x, _ = bicgstab(sp.identity(10, format='csr'), b)
    assert np.allclose(x, b)


def test_matches_dense_solve():
    rng = np.random.default_rng(8)
    dense = rng.random((50, 50)) * (rng.random((50, 50)) < 0.1) + 10.0 * np.eye(50)
    A = sp.csr_matrix(dense)
    b = rng.random(50)
    expected = np.linalg.solve(dense, b)
    for precond in (None, ilu0(A)):
        x, report = bicgstab(A, b, precond=precond, rel_tol=1e-12)
        assert report.converged
        assert np.allclose(x, expected, rtol=1e-9, atol=1e-12)


def test_initial_guess_is_used():
    A = _tridiagonal(20)
    b = np.ones(20)
    exact, _ = bicgstab(A, b, precond=ilu0(A), rel_tol=1e-13)
    _, report = bicgstab(A, b, x0=exact, rel_tol=1e-10)
    assert report.iterations == 0


def test_non_convergence_raises():
    C = _stage_matrix(m=20, theta_dt=1.0)
    b = np.random.default_rng(3).random(C.shape[0])
    error = expect_raises(SolverError, bicgstab, C, b, None, None, 1e-14, 1)
    assert error.report is not None and not error.report.converged
    expect_raises(ValueError, bicgstab, C, b[:-1])
    expect_raises(ValueError, bicgstab, C, b, None, None, 0.0)


def main():
    return run_tests("Sparse linear algebra tests", globals())


if __name__ == "__main__":
    exit(main())
