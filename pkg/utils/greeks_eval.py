"""
Greeks module for the two-asset Kou engine
Computes Delta and Gamma surfaces by finite differences on the grid and interpolates
values and Greeks at arbitrary points with local tensor cubics
"""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import BarycentricInterpolator

from models.run_models import Quantity
from utils.fd_operator import central_weights
from utils.spatial_grid import SpatialGrid


def _one_sided_weights(x: np.ndarray, at: float, order: int) -> np.ndarray:
    """Derivative weights of the quadratic through the three points x at `at`"""
    w = np.empty(3)
    for a in range(3):
        b, c = [idx for idx in range(3) if idx != a]
        denom = (x[a] - x[b]) * (x[a] - x[c])
        w[a] = ((at - x[b]) + (at - x[c])) / denom if order == 1 else 2.0 / denom
    return w


def full_derivative_matrix(nodes: np.ndarray, order: int) -> sp.csr_matrix:
    """Central differences inside, second-order one-sided 3-point formulas at both ends"""
    n = len(nodes)
    gaps = np.diff(nodes)
    w = central_weights(gaps[:-1], gaps[1:], order)
    rows = np.arange(1, n - 1)

    first = _one_sided_weights(nodes[:3], nodes[0], order)
    last = _one_sided_weights(nodes[-3:], nodes[-1], order)

    data = np.concatenate([w.wL, w.wC, w.wR, first, last])
    row_idx = np.concatenate([np.tile(rows, 3), [0, 0, 0], [n - 1] * 3])
    col_idx = np.concatenate([rows - 1, rows, rows + 1, [0, 1, 2], [n - 3, n - 2, n - 1]])
    return sp.csr_matrix((data, (row_idx, col_idx)), shape=(n, n))


@dataclass(frozen=True, eq=False)
class GreeksSurfaces:
    """Delta and Gamma surfaces indexed [i, j]; `boundary` flags one-sided nodes"""
    delta1: np.ndarray
    delta2: np.ndarray
    gamma11: np.ndarray
    gamma12: np.ndarray
    gamma22: np.ndarray
    boundary: np.ndarray

    def get(self, quantity: Quantity) -> np.ndarray:
        if quantity is Quantity.VALUE:
            raise ValueError("The value surface is not part of GreeksSurfaces")
        return getattr(self, quantity.value)

    def as_dict(self) -> Dict[str, np.ndarray]:
        return {q.value: self.get(q) for q in Quantity if q is not Quantity.VALUE}


def compute_greeks(V: np.ndarray, grid: SpatialGrid) -> GreeksSurfaces:
    """Five Greek surfaces of the solution vector V"""
    U = grid.to_matrix(V)
    D1x = full_derivative_matrix(grid.nodes1, 1)
    D2x = full_derivative_matrix(grid.nodes1, 2)
    D1y = full_derivative_matrix(grid.nodes2, 1)
    D2y = full_derivative_matrix(grid.nodes2, 2)

    delta1 = D1x @ U
    delta2 = (D1y @ U.T).T
    boundary = np.zeros(grid.shape, dtype=bool)
    boundary[[0, -1], :] = True
    boundary[:, [0, -1]] = True

    return GreeksSurfaces(
        delta1=delta1,
        delta2=delta2,
        gamma11=D2x @ U,
        gamma12=(D1y @ delta1.T).T,
        gamma22=(D2y @ U.T).T,
        boundary=boundary,
    )


def surface_of(result_V: np.ndarray, grid: SpatialGrid, quantity: Quantity,
               greeks: Optional[GreeksSurfaces] = None) -> np.ndarray:
    """Value or Greek surface [i, j] for one quantity"""
    if quantity is Quantity.VALUE:
        return grid.to_matrix(result_V)
    greeks = greeks or compute_greeks(result_V, grid)
    return greeks.get(quantity)


def _stencil(nodes: np.ndarray, s: float) -> slice:
    """Four neighbouring nodes around s, shifted inward at the ends"""
    m = len(nodes) - 1
    i = int(np.searchsorted(nodes, s, side='right')) - 1
    start = min(max(i - 1, 0), m - 3)
    return slice(start, start + 4)


def interpolate_at(surface: np.ndarray, grid: SpatialGrid,
                   s1: float, s2: float) -> float:
    """Tensor cubic through the 4 x 4 neighbouring nodes; exact at nodes

    Args:
        surface: (m+1, m+1) surface or length-M vector
        grid: grid the surface lives on
        s1, s2: query point in [0, Smax]^2

    Returns:
        interpolated value
    """
    if not (0.0 <= s1 <= grid.smax and 0.0 <= s2 <= grid.smax):
        raise ValueError(f"Query ({s1}, {s2}) lies outside [0, {grid.smax}]^2")
    U = np.asarray(surface, dtype=float)
    if U.ndim == 1:
        U = grid.to_matrix(U)
    if U.shape != grid.shape:
        raise ValueError(f"Surface shape {U.shape} does not match grid shape {grid.shape}")

    rows = _stencil(grid.nodes1, s1)
    cols = _stencil(grid.nodes2, s2)
    along1 = BarycentricInterpolator(grid.nodes1[rows], U[rows, cols], axis=0)(s1)
    return float(BarycentricInterpolator(grid.nodes2[cols], along1)(s2))


def point_values(V: np.ndarray, grid: SpatialGrid,
                 points: Iterable[Tuple[float, float]]) -> List[Dict[str, float]]:
    """Value and all five Greeks interpolated at each point"""
    greeks = compute_greeks(V, grid)
    rows = []
    for s1, s2 in points:
        row = {'s1': s1, 's2': s2}
        for quantity in Quantity:
            row[quantity.value] = interpolate_at(surface_of(V, grid, quantity, greeks), grid, s1, s2)
        rows.append(row)
    return rows
