"""
Sparse linear algebra module for the Kou PIDCP engine
Handles CSR products, ILU(0) factorization and right-preconditioned BiCGSTAB
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp
from numba import jit

logger = logging.getLogger(__name__)

DEFAULT_REL_TOL = 1e-10
DEFAULT_MAX_ITER = 400
BREAKDOWN_EPS = 1e-30


class SolverError(RuntimeError):
    """BiCGSTAB failed to converge or broke down twice"""

    def __init__(self, message: str, report: Optional['SolveReport'] = None):
        super().__init__(message)
        self.report = report


class ZeroPivotError(SolverError):
    """ILU(0) met a zero (or missing) pivot"""

    def __init__(self, row: int):
        super().__init__(f"Zero pivot in ILU(0) at row {row}")
        self.row = row


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    restarts: int = 0

    def to_dict(self) -> dict:
        return {
            'iterations': self.iterations,
            'residual': self.residual,
            'converged': self.converged,
            'restarts': self.restarts,
        }


def spmv(A: sp.spmatrix, x: np.ndarray) -> np.ndarray:
    """Row-wise product A @ x with a dimension check"""
    x = np.asarray(x)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"Dimension mismatch: matrix {A.shape} times vector {x.shape}")
    return A @ x


@jit(nopython=True, cache=True)
def _diag_positions(indptr, indices, n):
    diag = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for jj in range(indptr[i], indptr[i + 1]):
            if indices[jj] == i:
                diag[i] = jj
                break
    return diag


@jit(nopython=True, cache=True)
def _ilu0_ikj(indptr, indices, data, diag, n):
    """In-place IKJ ILU(0) on sorted CSR data; returns -1 or the failing row"""
    iw = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        start, end = indptr[i], indptr[i + 1]
        for jj in range(start, end):
            iw[indices[jj]] = jj
        for kk in range(start, diag[i]):
            k = indices[kk]
            pivot = data[diag[k]]
            if pivot == 0.0:
                return k
            lik = data[kk] / pivot
            data[kk] = lik
            for jj in range(diag[k] + 1, indptr[k + 1]):
                pos = iw[indices[jj]]
                if pos != -1:
                    data[pos] -= lik * data[jj]
        for jj in range(start, end):
            iw[indices[jj]] = -1
        if data[diag[i]] == 0.0:
            return i
    return -1


@jit(nopython=True, cache=True)
def _lu_solve(indptr, indices, data, diag, b):
    n = b.shape[0]
    y = np.empty(n)
    for i in range(n):
        acc = b[i]
        for jj in range(indptr[i], diag[i]):
            acc -= data[jj] * y[indices[jj]]
        y[i] = acc
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        acc = y[i]
        for jj in range(diag[i] + 1, indptr[i + 1]):
            acc -= data[jj] * x[indices[jj]]
        x[i] = acc / data[diag[i]]
    return x


@dataclass(frozen=True, eq=False)
class Ilu0Factors:
    """L and U stored together on the pattern of the factored matrix (unit L diagonal implicit)"""
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    diag: np.ndarray

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Forward then backward substitution"""
        return _lu_solve(self.indptr, self.indices, self.data, self.diag,
                         np.ascontiguousarray(b, dtype=np.float64))

    def to_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.n, self.n))

    @property
    def L(self) -> sp.csr_matrix:
        return sp.tril(self.to_csr(), k=-1, format='csr') + sp.identity(self.n, format='csr')

    @property
    def U(self) -> sp.csr_matrix:
        return sp.triu(self.to_csr(), format='csr')


def ilu0(A: sp.spmatrix) -> Ilu0Factors:
    """Zero-fill incomplete LU factorization

    Raises:
        ZeroPivotError: a row lacks its diagonal entry or a pivot vanishes
    """
    A = sp.csr_matrix(A, dtype=np.float64, copy=True)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"ILU(0) needs a square matrix, got {A.shape}")
    A.sort_indices()
    n = A.shape[0]
    indptr = A.indptr.astype(np.int64)
    indices = A.indices.astype(np.int64)
    data = A.data.copy()

    diag = _diag_positions(indptr, indices, n)
    missing = np.flatnonzero(diag < 0)
    if missing.size:
        raise ZeroPivotError(int(missing[0]))

    failed = _ilu0_ikj(indptr, indices, data, diag, n)
    if failed >= 0:
        raise ZeroPivotError(int(failed))
    return Ilu0Factors(indptr=indptr, indices=indices, data=data, diag=diag)


def bicgstab(A: sp.spmatrix, b: np.ndarray, x0: Optional[np.ndarray] = None,
             precond: Optional[Ilu0Factors] = None, rel_tol: float = DEFAULT_REL_TOL,
             max_iter: int = DEFAULT_MAX_ITER) -> Tuple[np.ndarray, SolveReport]:
    """Right-preconditioned BiCGSTAB

    Converged means ||b - A x||_2 <= rel_tol*||b||_2 for the true residual. A breakdown
    (rho or omega numerically zero) restarts once from the current iterate.

    Raises:
        SolverError: no convergence within max_iter, or a second breakdown
    """
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"BiCGSTAB needs a square matrix, got {A.shape}")
    if rel_tol <= 0:
        raise ValueError(f"rel_tol must be positive, got {rel_tol}")
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if b.shape != (n,):
        raise ValueError(f"Right-hand side must have length {n}, got shape {b.shape}")

    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return np.zeros(n), SolveReport(iterations=0, residual=0.0, converged=True)

    apply_m = precond.solve if precond is not None else (lambda y: y.copy())
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    target = rel_tol * b_norm

    r = b - spmv(A, x)
    if np.linalg.norm(r) <= target:
        return x, SolveReport(iterations=0, residual=np.linalg.norm(r) / b_norm, converged=True)

    iterations = 0
    restarts = 0
    fresh = True
    r_hat = p = v = None
    rho_old = alpha = omega = 1.0

    while iterations < max_iter:
        if fresh:
            r_hat = r.copy()
            p = np.zeros(n)
            v = np.zeros(n)
            rho_old = alpha = omega = 1.0
            fresh = False

        iterations += 1
        rho = r_hat @ r
        if abs(rho) <= BREAKDOWN_EPS * np.linalg.norm(r_hat) * np.linalg.norm(r) or omega == 0.0:
            if restarts >= 1:
                raise SolverError(f"BiCGSTAB breakdown after restart at iteration {iterations}",
                                  SolveReport(iterations, np.linalg.norm(r) / b_norm, False, restarts))
            logger.debug(f"BiCGSTAB breakdown at iteration {iterations}, restarting")
            restarts += 1
            r = b - spmv(A, x)
            fresh = True
            continue

        beta = (rho / rho_old) * (alpha / omega)
        p = r + beta * (p - omega * v)
        p_hat = apply_m(p)
        v = spmv(A, p_hat)
        alpha = rho / (r_hat @ v)
        s = r - alpha * v

        if np.linalg.norm(s) <= target:
            x = x + alpha * p_hat
            r = b - spmv(A, x)
            if np.linalg.norm(r) <= target:
                break
            fresh = True
            continue

        s_hat = apply_m(s)
        t = spmv(A, s_hat)
        tt = t @ t
        omega = (t @ s) / tt if tt > 0.0 else 0.0
        x = x + alpha * p_hat + omega * s_hat
        r = s - omega * t
        rho_old = rho

        if np.linalg.norm(r) <= target:
            # the recursive residual drifts; confirm with the true one
            r = b - spmv(A, x)
            if np.linalg.norm(r) <= target:
                break
            fresh = True

    residual = np.linalg.norm(b - spmv(A, x)) / b_norm
    report = SolveReport(iterations=iterations, residual=residual,
                         converged=residual <= rel_tol, restarts=restarts)
    if not report.converged:
        raise SolverError(
            f"BiCGSTAB did not converge in {max_iter} iterations (residual {residual:.3e})", report)
    return x, report
