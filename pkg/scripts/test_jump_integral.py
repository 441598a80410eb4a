"""
Jump integral tests
Checks the closed-form cell weights, the fast cumulative-sum evaluation against
the direct dense summation and the O(m^2) operation count
"""

import numpy as np
from scipy.integrate import quad

from runner import expect_raises, run_tests
from models.kou_model import KouParams, jump_density_factor
from utils.jump_integral import (OpCounter, apply, apply_edge, branch_weights, dense_matrix,
                                 precompute_tables)
from utils.spatial_grid import build_grid

PARAMS = KouParams()


def _setup(m, params=PARAMS):
    grid = build_grid(m, params.K, 10.0 * params.K)
    return grid, precompute_tables(grid, params)


def test_branch_weights_sum_to_closed_form():
    grid = build_grid(40, PARAMS.K, 10.0 * PARAMS.K)
    nodes = grid.nodes1
    eta_q, eta_p = PARAMS.eta_q1, PARAMS.eta_p1
    q = branch_weights(nodes, eta_q)
    assert np.allclose(np.cumsum(q.total), nodes[1:] ** eta_q / eta_q, rtol=1e-12)
    p = branch_weights(nodes, -eta_p, skip_first=True)
    assert p.total[0] == 0.0
    tail = np.cumsum(p.total[::-1])[::-1][1:]
    expected = (nodes[1:-1] ** -eta_p - nodes[-1] ** -eta_p) / eta_p
    assert np.allclose(tail, expected, rtol=1e-10)


def test_branch_weights_match_quadrature():
    grid = build_grid(20, PARAMS.K, 10.0 * PARAMS.K)
    nodes = grid.nodes1
    for beta, skip in ((PARAMS.eta_q1, False), (-PARAMS.eta_p1, True)):
        w = branch_weights(nodes, beta, skip_first=skip)
        for k in range(2, len(nodes) - 1, 3):
            x0, x1 = nodes[k], nodes[k + 1]
            hk = x1 - x0
            left, _ = quad(lambda z: z ** (beta - 1.0) * (x1 - z) / hk, x0, x1, epsrel=1e-13, epsabs=0)
            right, _ = quad(lambda z: z ** (beta - 1.0) * (z - x0) / hk, x0, x1, epsrel=1e-13, epsabs=0)
            assert np.isclose(w.left[k], left, rtol=1e-10, atol=0)
            assert np.isclose(w.right[k], right, rtol=1e-10, atol=0)


def test_branch_weights_reject_log_exponents():
    nodes = np.linspace(0.0, 1.0, 5)
    expect_raises(ValueError, branch_weights, nodes, 0.0)
    expect_raises(ValueError, branch_weights, nodes, -1.0, True)


def test_gamma_nonnegative():
    _, tables = _setup(16)
    for quadrant in (1, 2, 3, 4):
        assert np.all(tables.gamma(quadrant) >= 0.0)
        assert np.all(tables.psi(quadrant) > 0.0)
    expect_raises(ValueError, tables.gamma, 5)


def test_zero_and_constant_vectors():
    grid, tables = _setup(60)
    assert np.array_equal(apply(tables, grid, np.zeros(grid.size)), np.zeros(grid.size))
    J = grid.to_matrix(apply(tables, grid, np.ones(grid.size)))
    inner = np.flatnonzero(grid.nodes1 <= 2.0 * PARAMS.K)
    # constant interpolant: only the mass beyond Smax is missing
    assert np.allclose(J[np.ix_(inner, inner)], PARAMS.lam, rtol=1e-3)


def test_fast_apply_matches_dense():
    rng = np.random.default_rng(11)
    for m in (4, 7, 10):
        grid, tables = _setup(m)
        D = dense_matrix(grid, PARAMS, tables)
        for _ in range(20):
            V = rng.standard_normal(grid.size)
            fast = apply(tables, grid, V)
            dense = D @ V
            assert np.max(np.abs(fast - dense)) <= 1e-12 * max(1.0, np.max(np.abs(dense)))


def test_dense_guard():
    grid = build_grid(21, PARAMS.K, 10.0 * PARAMS.K)
    expect_raises(ValueError, dense_matrix, grid, PARAMS)


def test_linearity_and_monotonicity():
    rng = np.random.default_rng(5)
    grid, tables = _setup(30)
    V, W = rng.random(grid.size), rng.random(grid.size)
    lhs = apply(tables, grid, 2.0 * V - 3.0 * W)
    rhs = 2.0 * apply(tables, grid, V) - 3.0 * apply(tables, grid, W)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)
    assert np.all(apply(tables, grid, V) >= 0.0)
    assert np.all(apply(tables, grid, V + W) >= apply(tables, grid, V) - 1e-14)


def test_zero_intensity():
    params = KouParams(lam=0.0)
    grid, tables = _setup(12, params)
    V = np.random.default_rng(1).random(grid.size)
    assert np.array_equal(apply(tables, grid, V), np.zeros(grid.size))


def test_operation_count_scales_quadratically():
    counts = []
    for m in (100, 200):
        grid, tables = _setup(m)
        counter = OpCounter()
        apply(tables, grid, np.ones(grid.size), counter)
        counts.append(counter.ops)
    ratio = counts[1] / counts[0]
    assert 3.5 <= ratio <= 4.5


def test_edge_matches_quadrature():
    grid, tables = _setup(10)
    nodes = grid.nodes1
    V_edge = np.maximum(0.0, PARAMS.K - nodes) + 0.01 * nodes
    out = apply_edge(tables, grid, V_edge, axis=1)
    assert out[0] == PARAMS.lam * V_edge[0]
    for i in (1, 4, 7, 10):
        s = nodes[i]

        def integrand(z):
            return np.interp(z, nodes, V_edge) * jump_density_factor(z / s, PARAMS.p1, PARAMS.eta_p1,
                                                                     PARAMS.eta_q1) / s

        total = sum(quad(integrand, nodes[k], nodes[k + 1], epsrel=1e-12, epsabs=1e-14)[0]
                    for k in range(grid.m))
        assert np.isclose(out[i], PARAMS.lam * total, rtol=1e-8)


def test_edges_agree_with_full_apply():
    rng = np.random.default_rng(9)
    grid, tables = _setup(15)
    V = rng.random(grid.size)
    J = grid.to_matrix(apply(tables, grid, V))
    U = grid.to_matrix(V)
    assert np.allclose(J[:, 0], apply_edge(tables, grid, U[:, 0], axis=1), rtol=1e-14)
    assert np.allclose(J[0, :], apply_edge(tables, grid, U[0, :], axis=2), rtol=1e-14)
    expect_raises(ValueError, apply_edge, tables, grid, U[0, :], 3)
    expect_raises(ValueError, apply_edge, tables, grid, U[0, :-1], 1)


def main():
    return run_tests("Jump integral tests", globals())


if __name__ == "__main__":
    exit(main())
