"""
Spatial grid module for the two-asset Kou engine
Builds the smooth nonuniform tensor grid on [0, Smax]^2 and the cell-averaged payoff vector
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.optimize import bisect

logger = logging.getLogger(__name__)

GRADING_RTOL = 1e-13


class GridConstructionError(RuntimeError):
    """Raised when the outer grading parameter cannot be determined"""


@dataclass(frozen=True, eq=False)
class SpatialGrid:
    """Tensor grid, identical in both directions

    nodes[i] = i*h on the uniform core [0, 2K] (i <= m_unif); outside it the nodes follow
    2K + alpha*sinh(j*dxi) with alpha = h/dxi, ending exactly at Smax.
    """
    m: int
    nodes1: np.ndarray
    nodes2: np.ndarray
    smax: float
    K: float
    m_unif: int
    h: float
    dxi: float

    @property
    def size(self) -> int:
        """Number of unknowns M = (m+1)^2"""
        return (self.m + 1) ** 2

    @property
    def shape(self):
        return self.m + 1, self.m + 1

    def to_matrix(self, V: np.ndarray) -> np.ndarray:
        """View a length-M vector as U[i, j] = V[i + (m+1)*j]"""
        V = np.asarray(V)
        if V.shape != (self.size,):
            raise ValueError(f"Expected a vector of length {self.size}, got shape {V.shape}")
        return V.reshape(self.shape, order='F')

    def to_vector(self, U: np.ndarray) -> np.ndarray:
        return np.asarray(U).ravel(order='F')

    def index(self, i: int, j: int) -> int:
        return i + (self.m + 1) * j

    def boundary_mask(self) -> np.ndarray:
        """Vector mask of the Dirichlet rows s1 = Smax or s2 = Smax"""
        mask = np.zeros(self.shape, dtype=bool)
        mask[self.m, :] = True
        mask[:, self.m] = True
        return self.to_vector(mask)

    def mesh(self):
        """Node coordinates as (S1, S2) matrices indexed [i, j]"""
        return np.meshgrid(self.nodes1, self.nodes2, indexing='ij')

    def to_frame(self) -> pd.DataFrame:
        """Grid dump: one row per node per direction"""
        return pd.DataFrame({
            'direction': np.repeat([1, 2], self.m + 1),
            'coordinate': np.concatenate([self.nodes1, self.nodes2]),
        })


def _grading_parameter(h: float, k: int, span: float) -> float:
    """Solve (h/x)*sinh(k*x) = span for x > 0 by bisection"""
    if span <= k * h:
        raise GridConstructionError(
            f"Outer span {span} does not exceed k*h = {k * h}; no stretched grading exists")

    def residual(x):
        return (h / x) * math.sinh(k * x) - span

    lower = 1e-8 / k
    upper = 1.0 / k
    while residual(upper) <= 0.0:
        upper *= 2.0
        if k * upper > 700.0:
            raise GridConstructionError("Could not bracket the grading parameter")
    try:
        return bisect(residual, lower, upper, xtol=1e-300, rtol=GRADING_RTOL, maxiter=1000)
    except (RuntimeError, ValueError) as e:
        raise GridConstructionError(f"Bisection for the grading parameter failed: {e}") from e


def build_grid(m: int, K: float, smax: float) -> SpatialGrid:
    """Build the grid with ceil(m/2) uniform intervals on [0, 2K]

    Args:
        m: number of intervals per direction (>= 3)
        K: strike
        smax: domain bound, must exceed 2K

    Returns:
        SpatialGrid with nodes[0] = 0 and nodes[m] = smax
    """
    if int(m) != m or m < 3:
        raise ValueError(f"m must be an integer >= 3, got {m}")
    if K <= 0:
        raise ValueError(f"K must be positive, got {K}")
    if smax <= 2.0 * K:
        raise ValueError(f"Smax must exceed 2K = {2.0 * K}, got {smax}")
    m = int(m)
    m_unif = math.ceil(m / 2)
    h = 2.0 * K / m_unif
    k = m - m_unif

    dxi = _grading_parameter(h, k, smax - 2.0 * K)
    alpha = h / dxi

    nodes = np.empty(m + 1)
    nodes[:m_unif + 1] = np.arange(m_unif + 1) * h
    nodes[m_unif] = 2.0 * K
    nodes[m_unif + 1:] = 2.0 * K + alpha * np.sinh(np.arange(1, k + 1) * dxi)
    nodes[m] = smax

    logger.debug(f"Grid m={m} m_unif={m_unif} h={h:.6g} dxi={dxi:.12g} smax={smax}")
    return SpatialGrid(m=m, nodes1=nodes, nodes2=nodes.copy(), smax=float(smax), K=float(K),
                       m_unif=m_unif, h=h, dxi=dxi)


def payoff(s1, s2, K: float):
    """Put-on-the-average payoff max(0, K - (s1+s2)/2)"""
    return np.maximum(0.0, K - 0.5 * (np.asarray(s1, dtype=float) + np.asarray(s2, dtype=float)))


def _dual_cell_edges(nodes: np.ndarray):
    """Left and right edges of the dual cells, clipped at 0 and Smax"""
    gaps = np.diff(nodes)
    lo = nodes.copy()
    hi = nodes.copy()
    lo[1:] -= 0.5 * gaps
    hi[:-1] += 0.5 * gaps
    return lo, hi


def kink_mask(grid: SpatialGrid, K: float = None) -> np.ndarray:
    """Matrix mask [i, j] of the nodes whose dual cell straddles s1 + s2 = 2K"""
    K = grid.K if K is None else K
    lo1, hi1 = _dual_cell_edges(grid.nodes1)
    lo2, hi2 = _dual_cell_edges(grid.nodes2)
    return ((lo1[:, None] + lo2[None, :]) < 2.0 * K) & ((hi1[:, None] + hi2[None, :]) > 2.0 * K)


def initial_vector(grid: SpatialGrid, K: float = None) -> np.ndarray:
    """Payoff vector V0 with exact cell averages at the kink-straddling nodes

    The payoff is g(s1 + s2) with g(u) = max(0, K - u/2); G(u) = max(0, 2K - u)^3 / 12
    satisfies G'' = g, so the integral over a rectangle is a four-corner combination of G.
    """
    K = grid.K if K is None else K
    S1, S2 = grid.mesh()
    values = payoff(S1, S2, K)

    lo1, hi1 = _dual_cell_edges(grid.nodes1)
    lo2, hi2 = _dual_cell_edges(grid.nodes2)
    straddle = kink_mask(grid, K)

    def G(u):
        return np.maximum(0.0, 2.0 * K - u) ** 3 / 12.0

    a1, b1 = lo1[:, None], hi1[:, None]
    a2, b2 = lo2[None, :], hi2[None, :]
    area = (b1 - a1) * (b2 - a2)
    averaged = (G(b1 + b2) - G(a1 + b2) - G(b1 + a2) + G(a1 + a2)) / area
    values = np.where(straddle, averaged, values)

    logger.debug(f"Cell averaging applied at {int(straddle.sum())} nodes")
    return grid.to_vector(values)
