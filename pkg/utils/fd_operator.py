"""
Finite difference operator for the two-asset Kou engine
Assembles the sparse matrix A_D of the differential part of the pricing operator,
including the -(r + lambda) reaction term, on the nonuniform grid
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from models.kou_model import JumpMoments, KouParams
from utils.spatial_grid import SpatialGrid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StencilWeights:
    """Weights of a three-point stencil (left, center, right)"""
    wL: np.ndarray
    wC: np.ndarray
    wR: np.ndarray


def central_weights(hL, hR, order: int) -> StencilWeights:
    """Nonuniform central difference weights for the first or second derivative

    Args:
        hL: spacing to the left neighbour (scalar or array)
        hR: spacing to the right neighbour (scalar or array)
        order: 1 or 2

    Returns:
        StencilWeights exact for quadratics
    """
    hL = np.asarray(hL, dtype=float)
    hR = np.asarray(hR, dtype=float)
    if np.any(hL <= 0.0) or np.any(hR <= 0.0):
        raise ValueError("Stencil spacings must be positive")
    if order == 1:
        return StencilWeights(
            wL=-hR / (hL * (hL + hR)),
            wC=(hR - hL) / (hL * hR),
            wR=hL / (hR * (hL + hR)),
        )
    if order == 2:
        return StencilWeights(
            wL=2.0 / (hL * (hL + hR)),
            wC=-2.0 / (hL * hR),
            wR=2.0 / (hR * (hL + hR)),
        )
    raise ValueError(f"Derivative order must be 1 or 2, got {order}")


def derivative_matrix(nodes: np.ndarray, order: int) -> sp.csr_matrix:
    """One-dimensional central difference matrix; first and last rows are empty"""
    n = len(nodes)
    gaps = np.diff(nodes)
    w = central_weights(gaps[:-1], gaps[1:], order)
    rows = np.arange(1, n - 1)
    data = np.concatenate([w.wL, w.wC, w.wR])
    cols = np.concatenate([rows - 1, rows, rows + 1])
    return sp.csr_matrix((data, (np.tile(rows, 3), cols)), shape=(n, n))


def assemble_AD(grid: SpatialGrid, params: KouParams,
                moments: Optional[JumpMoments] = None) -> sp.csr_matrix:
    """Assemble A_D on the grid, ordered l = i + (m+1)*j

    Edges s1 = 0 and s2 = 0 keep the terms whose coefficients do not vanish there;
    rows on s1 = Smax or s2 = Smax are identity rows (homogeneous Dirichlet data).
    """
    moments = moments or params.moments
    n = grid.m + 1

    S1 = sp.diags(grid.nodes1)
    S2 = sp.diags(grid.nodes2)
    D1x = derivative_matrix(grid.nodes1, 1)
    D2x = derivative_matrix(grid.nodes1, 2)
    D1y = derivative_matrix(grid.nodes2, 1)
    D2y = derivative_matrix(grid.nodes2, 2)
    eye = sp.identity(n, format='csr')

    # Direction 1 acts on the fast index i, direction 2 on the slow index j
    L1 = 0.5 * params.sigma1 ** 2 * (S1 @ S1 @ D2x) + (params.r - params.lam * moments.zeta1) * (S1 @ D1x)
    L2 = 0.5 * params.sigma2 ** 2 * (S2 @ S2 @ D2y) + (params.r - params.lam * moments.zeta2) * (S2 @ D1y)
    cross = params.rho * params.sigma1 * params.sigma2 * sp.kron(S2 @ D1y, S1 @ D1x)

    A = (sp.kron(eye, L1) + sp.kron(L2, eye) + cross
         - (params.r + params.lam) * sp.identity(n * n))

    dirichlet = grid.boundary_mask().astype(float)
    A = sp.diags(1.0 - dirichlet) @ A + sp.diags(dirichlet)
    A = sp.csr_matrix(A)
    A.eliminate_zeros()
    A.sort_indices()

    logger.debug(f"Assembled A_D with shape={A.shape} nnz={A.nnz}")
    return A
