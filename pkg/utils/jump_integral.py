"""
Jump integral module for the two-asset Kou engine
Precomputes cell coefficient tables and evaluates the nonlocal integral term A_J V
with cumulative sums in O(m^2) operations
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from models.kou_model import KouParams
from utils.spatial_grid import SpatialGrid

logger = logging.getLogger(__name__)

DENSE_MAX_M = 20


@dataclass
class OpCounter:
    """Scalar operation tally filled in by apply when passed in"""
    ops: int = 0

    def add(self, n: int):
        self.ops += int(n)


@dataclass(frozen=True)
class BranchWeights:
    """Per-cell weights of the left and right cell corners for one kernel branch

    Cell k (0-based) is [s_k, s_{k+1}]; `left[k]` multiplies v(s_k) and `right[k]` v(s_{k+1}).
    """
    left: np.ndarray
    right: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.left + self.right


@dataclass(frozen=True, eq=False)
class DirectionTables:
    """Cell weights and node prefactors of one direction"""
    q: BranchWeights
    p: BranchWeights
    eta_q: float
    eta_p: float
    # psi factors at nodes 1..m (s > 0)
    psi_q: np.ndarray
    psi_p: np.ndarray


@dataclass(frozen=True, eq=False)
class JumpCoeffTables:
    """Everything apply needs; fully determined by the Kou parameters and the grid

    Quadrant 1 is (z1 < s1, z2 < s2), quadrant 2 (z1 > s1, z2 < s2),
    quadrant 3 (z1 < s1, z2 > s2) and quadrant 4 (z1 > s1, z2 > s2).
    """
    m: int
    lam: float
    dir1: DirectionTables
    dir2: DirectionTables

    def _branches(self, quadrant: int):
        first = self.dir1.q if quadrant in (1, 3) else self.dir1.p
        second = self.dir2.q if quadrant in (1, 2) else self.dir2.p
        return first, second

    def psi(self, quadrant: int) -> np.ndarray:
        """Prefactor psi_c on nodes (i, j) with i, j >= 1, shape (m, m)"""
        f1 = self.dir1.psi_q if quadrant in (1, 3) else self.dir1.psi_p
        f2 = self.dir2.psi_q if quadrant in (1, 2) else self.dir2.psi_p
        return self.lam * f1[:, None] * f2[None, :]

    def gamma(self, quadrant: int) -> np.ndarray:
        """Corner weights (g00, g10, g01, g11) of every cell, shape (4, m, m)"""
        if quadrant not in (1, 2, 3, 4):
            raise ValueError(f"Quadrant must be 1..4, got {quadrant}")
        a, b = self._branches(quadrant)
        return np.stack([
            np.outer(a.left, b.left),
            np.outer(a.right, b.left),
            np.outer(a.left, b.right),
            np.outer(a.right, b.right),
        ])


def _power_integral(x0: np.ndarray, x1: np.ndarray, beta: float) -> np.ndarray:
    """Integral of z^(beta-1) over [x0, x1]; x0 may be 0 only for beta > 0"""
    out = np.empty_like(x1)
    zero = x0 == 0.0
    out[zero] = x1[zero] ** beta / beta
    pos = ~zero
    out[pos] = x0[pos] ** beta * np.expm1(beta * np.log(x1[pos] / x0[pos])) / beta
    return out


def branch_weights(nodes: np.ndarray, beta: float, skip_first: bool = False) -> BranchWeights:
    """Closed-form cell weights of the kernel z^(beta-1) against the linear interpolant

    With I(b) the integral of z^(b-1) over the cell [x0, x1] of width hk:
    left = (x1*I(beta) - I(beta+1))/hk and right = (I(beta+1) - x0*I(beta))/hk.
    """
    if beta == 0.0 or beta + 1.0 == 0.0:
        raise ValueError(f"Kernel exponent {beta} would need a logarithmic antiderivative")
    x0 = nodes[:-1].astype(float)
    x1 = nodes[1:].astype(float)
    if skip_first:
        x0, x1 = x0[1:], x1[1:]
    hk = x1 - x0
    I0 = _power_integral(x0, x1, beta)
    I1 = _power_integral(x0, x1, beta + 1.0)
    left = (x1 * I0 - I1) / hk
    right = (I1 - x0 * I0) / hk
    if skip_first:
        # cell [0, s_1] is only reached by the p-branch from s = 0, which never happens
        left = np.concatenate([[0.0], left])
        right = np.concatenate([[0.0], right])
    return BranchWeights(left=left, right=right)


def _direction_tables(nodes: np.ndarray, p: float, eta_p: float, eta_q: float) -> DirectionTables:
    s = nodes[1:]
    return DirectionTables(
        q=branch_weights(nodes, eta_q),
        p=branch_weights(nodes, -eta_p, skip_first=True),
        eta_q=eta_q,
        eta_p=eta_p,
        psi_q=(1.0 - p) * eta_q * s ** (-eta_q),
        psi_p=p * eta_p * s ** eta_p,
    )


def precompute_tables(grid: SpatialGrid, params: KouParams) -> JumpCoeffTables:
    """Build the coefficient tables once per (grid, params)"""
    if params.eta_p1 <= 1.0 or params.eta_p2 <= 1.0 or params.eta_q1 <= 0.0 or params.eta_q2 <= 0.0:
        raise ValueError("Kou rates must satisfy eta_p > 1 and eta_q > 0")
    tables = JumpCoeffTables(
        m=grid.m,
        lam=params.lam,
        dir1=_direction_tables(grid.nodes1, params.p1, params.eta_p1, params.eta_q1),
        dir2=_direction_tables(grid.nodes2, params.p2, params.eta_p2, params.eta_q2),
    )
    logger.debug(f"Jump tables ready for m={grid.m} lambda={params.lam}")
    return tables


def _forward(x: np.ndarray, axis: int) -> np.ndarray:
    """Inclusive prefix sums; entry c holds cells 0..c"""
    return np.cumsum(x, axis=axis)


def _backward(x: np.ndarray, axis: int) -> np.ndarray:
    """Exclusive suffix sums shifted to nodes; entry c holds cells c+1.., last entry is 0"""
    rev = np.flip(np.cumsum(np.flip(x, axis=axis), axis=axis), axis=axis)
    pad = [(0, 0)] * x.ndim
    pad[axis] = (0, 1)
    return np.pad(np.delete(rev, 0, axis=axis), pad)


def _edge_sum(direction: DirectionTables, v: np.ndarray, lam: float,
              counter: Optional[OpCounter] = None) -> np.ndarray:
    """1D integral at nodes 1..m of the piecewise-linear interpolant of v"""
    g_q = direction.q.left * v[:-1] + direction.q.right * v[1:]
    g_p = direction.p.left * v[:-1] + direction.p.right * v[1:]
    out = lam * (direction.psi_q * _forward(g_q, 0) + direction.psi_p * _backward(g_p, 0))
    if counter is not None:
        m = len(v) - 1
        counter.add(6 * m + 2 * m + 5 * m)
    return out


def apply_edge(tables: JumpCoeffTables, grid: SpatialGrid, V_edge: np.ndarray, axis: int) -> np.ndarray:
    """Jump term along a degenerate edge

    axis=1 is the edge s2 = 0 (V_edge varies with s1), axis=2 the edge s1 = 0.
    Entry 0 is the corner, where the integral reduces to lambda*V_edge[0].
    """
    V_edge = np.asarray(V_edge, dtype=float)
    if V_edge.shape != (grid.m + 1,):
        raise ValueError(f"Edge vector must have length {grid.m + 1}, got shape {V_edge.shape}")
    if axis not in (1, 2):
        raise ValueError(f"axis must be 1 or 2, got {axis}")
    direction = tables.dir1 if axis == 1 else tables.dir2
    out = np.empty(grid.m + 1)
    out[0] = tables.lam * V_edge[0]
    out[1:] = _edge_sum(direction, V_edge, tables.lam)
    return out


def apply(tables: JumpCoeffTables, grid: SpatialGrid, V: np.ndarray,
          counter: Optional[OpCounter] = None) -> np.ndarray:
    """Evaluate A_J V on the full grid

    Each quadrant contributes psi_c(i, j) times a double cumulative sum of the
    corner-weighted cell values G_c; edges use the 1D form, the corner lambda*V00.
    """
    U = grid.to_matrix(np.asarray(V, dtype=float))
    m = grid.m
    if tables.lam == 0.0:
        return np.zeros(grid.size)
    d1, d2 = tables.dir1, tables.dir2
    J = np.empty((m + 1, m + 1))

    # Contract direction 2 first: X[b][i, l] = left_b[l]*U[i, l] + right_b[l]*U[i, l+1]
    X = {
        'q': U[:, :-1] * d2.q.left + U[:, 1:] * d2.q.right,
        'p': U[:, :-1] * d2.p.left + U[:, 1:] * d2.p.right,
    }

    def cells(a, key):
        return a.left[:, None] * X[key][:-1] + a.right[:, None] * X[key][1:]

    S1 = _forward(_forward(cells(d1.q, 'q'), 0), 1)
    S2 = _forward(_backward(cells(d1.p, 'q'), 0), 1)
    S3 = _backward(_forward(cells(d1.q, 'p'), 0), 1)
    S4 = _backward(_backward(cells(d1.p, 'p'), 0), 1)

    lam = tables.lam
    J[1:, 1:] = lam * (
        d1.psi_q[:, None] * (d2.psi_q[None, :] * S1 + d2.psi_p[None, :] * S3)
        + d1.psi_p[:, None] * (d2.psi_q[None, :] * S2 + d2.psi_p[None, :] * S4)
    )
    J[0, 0] = lam * U[0, 0]
    J[1:, 0] = _edge_sum(d1, U[:, 0], lam, counter)
    J[0, 1:] = _edge_sum(d2, U[0, :], lam, counter)

    if counter is not None:
        counter.add(2 * 3 * (m + 1) * m)   # direction-2 contraction
        counter.add(4 * 3 * m * m)         # corner combinations
        counter.add(4 * 2 * m * m)         # double cumulative sums
        counter.add(11 * m * m + 1)        # prefactors and quadrant sum

    return grid.to_vector(J)


def dense_matrix(grid: SpatialGrid, params: KouParams,
                 tables: Optional[JumpCoeffTables] = None) -> np.ndarray:
    """Dense M x M matrix of the jump term by direct summation over cells (small m only)"""
    m = grid.m
    if m > DENSE_MAX_M:
        raise ValueError(f"Dense jump matrix refused for m={m} > {DENSE_MAX_M}")
    tables = tables or precompute_tables(grid, params)
    n = m + 1
    D = np.zeros((n * n, n * n))
    lam = tables.lam
    cell = np.arange(m)

    def idx(i, j):
        return i + n * j

    D[0, 0] = lam
    for i in range(1, n):
        for j in range(1, n):
            row = idx(i, j)
            for k in cell:
                a = tables.dir1.q if k < i else tables.dir1.p
                f1 = tables.dir1.psi_q[i - 1] if k < i else tables.dir1.psi_p[i - 1]
                for l in cell:
                    b = tables.dir2.q if l < j else tables.dir2.p
                    f2 = tables.dir2.psi_q[j - 1] if l < j else tables.dir2.psi_p[j - 1]
                    w = lam * f1 * f2
                    D[row, idx(k, l)] += w * a.left[k] * b.left[l]
                    D[row, idx(k + 1, l)] += w * a.right[k] * b.left[l]
                    D[row, idx(k, l + 1)] += w * a.left[k] * b.right[l]
                    D[row, idx(k + 1, l + 1)] += w * a.right[k] * b.right[l]

    for axis, direction in ((1, tables.dir1), (2, tables.dir2)):
        for i in range(1, n):
            row = idx(i, 0) if axis == 1 else idx(0, i)
            for k in cell:
                br, f = (direction.q, direction.psi_q[i - 1]) if k < i else (direction.p, direction.psi_p[i - 1])
                lo = idx(k, 0) if axis == 1 else idx(0, k)
                hi = idx(k + 1, 0) if axis == 1 else idx(0, k + 1)
                D[row, lo] += lam * f * br.left[k]
                D[row, hi] += lam * f * br.right[k]
    return D


def dense_apply(grid: SpatialGrid, params: KouParams, V: np.ndarray) -> np.ndarray:
    """Reference evaluation of A_J V through the explicitly formed dense matrix"""
    return dense_matrix(grid, params) @ np.asarray(V, dtype=float)
