"""
Finite difference operator tests
Covers stencil weights, stencil exactness of A_D and its sparsity structure
"""

import numpy as np

from runner import expect_raises, run_tests
from models.kou_model import KouParams
from utils.fd_operator import assemble_AD, central_weights
from utils.spatial_grid import build_grid

PARAMS = KouParams()


def _setup(m=20, params=PARAMS):
    grid = build_grid(m, params.K, 10.0 * params.K)
    return grid, assemble_AD(grid, params)


def test_uniform_weights():
    h = 0.5
    w1 = central_weights(h, h, 1)
    assert np.allclose([w1.wL, w1.wC, w1.wR], [-1.0 / (2 * h), 0.0, 1.0 / (2 * h)])
    w2 = central_weights(h, h, 2)
    assert np.allclose([w2.wL, w2.wC, w2.wR], [1.0 / h ** 2, -2.0 / h ** 2, 1.0 / h ** 2])


def test_nonuniform_weights():
    w = central_weights(1.0, 2.0, 1)
    assert np.allclose([w.wL, w.wC, w.wR], [-2.0 / 3.0, 0.5, 1.0 / 6.0], rtol=1e-15)
    rng = np.random.default_rng(3)
    hL, hR = rng.uniform(0.1, 3.0, 50), rng.uniform(0.1, 3.0, 50)
    w1 = central_weights(hL, hR, 1)
    assert np.allclose(w1.wL + w1.wC + w1.wR, 0.0, atol=1e-12)
    assert np.allclose(-w1.wL * hL + w1.wR * hR, 1.0)
    w2 = central_weights(hL, hR, 2)
    assert np.allclose(w2.wL + w2.wC + w2.wR, 0.0, atol=1e-10)
    assert np.allclose(-w2.wL * hL + w2.wR * hR, 0.0, atol=1e-10)
    assert np.allclose(w2.wL * hL ** 2 + w2.wR * hR ** 2, 2.0)


def test_weights_reject_bad_input():
    expect_raises(ValueError, central_weights, 0.0, 1.0, 1)
    expect_raises(ValueError, central_weights, 1.0, -1.0, 2)
    expect_raises(ValueError, central_weights, 1.0, 1.0, 3)


def test_corner_row():
    grid, A = _setup()
    row = A.getrow(grid.index(0, 0))
    assert row.nnz == 1
    assert row.indices[0] == 0
    assert np.isclose(row.data[0], -(PARAMS.r + PARAMS.lam))


def test_constant_vector():
    grid, A = _setup()
    out = A @ np.ones(grid.size)
    free = ~grid.boundary_mask()
    assert np.allclose(out[free], -(PARAMS.r + PARAMS.lam), rtol=0, atol=1e-9)
    assert np.allclose(out[~free], 1.0)


def test_stencil_exactness():
    p = PARAMS
    zeta1, zeta2 = p.moments.zeta1, p.moments.zeta2
    b1, b2 = p.r - p.lam * zeta1, p.r - p.lam * zeta2
    c = p.r + p.lam
    grid, A = _setup(m=50)
    S1, S2 = grid.mesh()
    cases = [
        (np.ones_like(S1), -c * np.ones_like(S1)),
        (S1, (b1 - c) * S1),
        (S2, (b2 - c) * S2),
        (S1 * S2, (p.rho * p.sigma1 * p.sigma2 + b1 + b2 - c) * S1 * S2),
        (S1 ** 2, (p.sigma1 ** 2 + 2.0 * b1 - c) * S1 ** 2),
        (S2 ** 2, (p.sigma2 ** 2 + 2.0 * b2 - c) * S2 ** 2),
    ]
    interior = np.zeros(grid.shape, dtype=bool)
    interior[1:-1, 1:-1] = True
    for u, expected in cases:
        got = grid.to_matrix(A @ grid.to_vector(u))
        scale = np.max(np.abs(expected[interior]))
        assert np.max(np.abs(got[interior] - expected[interior])) <= 1e-10 * scale


def test_edges_keep_one_dimensional_operator():
    p = PARAMS
    grid, A = _setup()
    S1, S2 = grid.mesh()
    b2 = p.r - p.lam * p.moments.zeta2
    # on s1 = 0 the operator acting on s2^2 is (sigma2^2 + 2 b2 - r - lam) s2^2
    got = grid.to_matrix(A @ grid.to_vector(S2 ** 2))[0, 1:-1]
    expected = (p.sigma2 ** 2 + 2.0 * b2 - p.r - p.lam) * grid.nodes2[1:-1] ** 2
    assert np.allclose(got, expected, rtol=1e-10)


def test_sparsity_structure():
    grid, A = _setup()
    assert A.has_sorted_indices
    m = grid.m
    nnz = np.diff(A.indptr)
    U = grid.to_matrix(nnz)
    assert U[1:m, 1:m].max() <= 9
    assert U[0, 1:m].max() <= 3 and U[1:m, 0].max() <= 3
    # Dirichlet rows are identity rows
    for l in np.flatnonzero(grid.boundary_mask()):
        row = A.getrow(l)
        assert row.nnz == 1 and row.indices[0] == l and row.data[0] == 1.0


def test_zero_correlation_splits():
    params = KouParams(rho=0.0)
    grid, A = _setup(params=params)
    n = grid.m + 1
    coo = A.tocoo()
    i_row, j_row = coo.row % n, coo.row // n
    i_col, j_col = coo.col % n, coo.col // n
    assert np.all((i_row == i_col) | (j_row == j_col))


def main():
    return run_tests("Finite difference operator tests", globals())


if __name__ == "__main__":
    exit(main())
