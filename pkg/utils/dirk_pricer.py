"""
DIRK-P pricer module for the two-asset Kou engine
Steps the semidiscrete American put-on-the-average problem with the two-stage DIRK method,
combined penalty and fixed-point iterations, and optional backward Euler damping
"""

import logging
import time
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from models.kou_model import KouParams
from models.run_models import DirkConfig, Variant
from utils import jump_integral
from utils.fd_operator import assemble_AD
from utils.sparse_linalg import SolveReport, bicgstab, ilu0
from utils.spatial_grid import SpatialGrid, initial_vector

logger = logging.getLogger(__name__)


class PenaltyIterationError(RuntimeError):
    """Combined penalty / fixed-point iteration hit its cap"""

    def __init__(self, n: int, stage: int, max_inner: int):
        super().__init__(f"Penalty iteration did not stop within {max_inner} iterations "
                         f"(step n={n}, stage {stage})")
        self.n = n
        self.stage = stage


def time_grid(N: int, T: float, kind: str = "quadratic") -> np.ndarray:
    """Temporal grid t^n = (n/N)^2 T, or n T / N for kind='uniform'"""
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    if T < 0:
        raise ValueError(f"T must be nonnegative, got {T}")
    frac = np.arange(N + 1) / N
    if kind == "quadratic":
        t = frac ** 2 * T
    elif kind == "uniform":
        t = frac * T
    else:
        raise ValueError(f"Unknown time grid: {kind!r}")
    t[-1] = T
    return t


def stability_function(theta: float, z: complex) -> complex:
    """R(z) = (1 + (1-2 theta) z + (1/2 - 2 theta + theta^2) z^2) / (1 - theta z)^2"""
    denom = 1.0 - theta * z
    if denom == 0:
        raise ValueError(f"z = {z} is the pole 1/theta of the stability function")
    return (1.0 + (1.0 - 2.0 * theta) * z + (0.5 - 2.0 * theta + theta ** 2) * z ** 2) / denom ** 2


def stability_limit(theta: float) -> float:
    """R(infinity); zero exactly for the L-stable choices theta = 1 +- sqrt(2)/2"""
    return (0.5 - 2.0 * theta + theta ** 2) / theta ** 2


def penalty_diag(Y: np.ndarray, V0: np.ndarray, large: float) -> np.ndarray:
    """Large where Y < V0 strictly, else 0"""
    Y = np.asarray(Y)
    V0 = np.asarray(V0)
    if Y.shape != V0.shape:
        raise ValueError(f"Shape mismatch: Y {Y.shape} vs V0 {V0.shape}")
    return np.where(Y < V0, large, 0.0)


@dataclass(frozen=True, eq=False)
class SemiDiscreteSystem:
    """V' = A_D V + A_J V subject to V >= V0, with rows in `dirichlet` pinned to 0"""
    A_D: sp.csr_matrix
    jump: Callable[[np.ndarray], np.ndarray]
    V0: np.ndarray
    dirichlet: np.ndarray

    @property
    def size(self) -> int:
        return self.A_D.shape[0]

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.A_D @ v + self.jump(v)


def build_system(params: KouParams, grid: SpatialGrid) -> SemiDiscreteSystem:
    """Assemble A_D, the jump tables and V0 for a priced grid"""
    A_D = assemble_AD(grid, params)
    tables = jump_integral.precompute_tables(grid, params)
    return SemiDiscreteSystem(
        A_D=A_D,
        jump=partial(jump_integral.apply, tables, grid),
        V0=initial_vector(grid, params.K),
        dirichlet=grid.boundary_mask(),
    )


@dataclass
class PricerState:
    """Solution history and per-step statistics of one run"""
    v_prev: np.ndarray
    times: np.ndarray
    v_prev2: Optional[np.ndarray] = None
    n: int = 0
    kappa1: List[int] = field(default_factory=list)
    kappa2: List[int] = field(default_factory=list)
    solver_iterations: int = 0

    def dt(self, n: int) -> float:
        return float(self.times[n] - self.times[n - 1])

    def advance(self, v_new: np.ndarray, kappa1: int, kappa2: int):
        self.v_prev2 = self.v_prev
        self.v_prev = v_new
        self.n += 1
        self.kappa1.append(kappa1)
        self.kappa2.append(kappa2)


def start_vector(state: PricerState, config: DirkConfig, n: int) -> np.ndarray:
    """Linear extrapolation from the two previous time levels, or V^{n-1} itself"""
    if config.start == "constant" or n < 2 or state.v_prev2 is None:
        return state.v_prev.copy()
    dt_prev = state.dt(n - 1)
    if dt_prev == 0.0:
        return state.v_prev.copy()
    return state.v_prev + (state.dt(n) / dt_prev) * (state.v_prev - state.v_prev2)


def _stage_matrix(system: SemiDiscreteSystem, theta_dt: float) -> sp.csr_matrix:
    """I - theta*dt*A_D with the Dirichlet rows replaced by identity rows"""
    M = sp.identity(system.size, format='csr') - theta_dt * system.A_D
    pinned = system.dirichlet.astype(float)
    M = sp.diags(1.0 - pinned) @ M + sp.diags(pinned)
    return sp.csr_matrix(M)


def _penalized_solve(C: sp.csr_matrix, P: np.ndarray, rhs: np.ndarray, x0: np.ndarray,
                     config: DirkConfig) -> Tuple[np.ndarray, SolveReport]:
    """BiCGSTAB on (C + diag(P)) Y = rhs with every row divided by 1 + P_i

    Penalized rows then read Y_i ~ V0_i, so the residual norm is on the scale of V
    and not of the penalty.
    """
    scale = 1.0 / (1.0 + P)
    M = sp.csr_matrix(sp.diags(scale) @ (C + sp.diags(P)))
    return bicgstab(M, scale * rhs, x0=x0, precond=ilu0(M),
                    rel_tol=config.solver_tol, max_iter=config.solver_max_iter)


def _penalty_iteration(system: SemiDiscreteSystem, C: sp.csr_matrix, W: np.ndarray,
                       theta_dt: float, start: np.ndarray, config: DirkConfig,
                       state: PricerState, n: int, stage: int) -> Tuple[np.ndarray, int]:
    """Solve (C + P_{k-1}) Y_k = W + theta*dt*A_J Y_{k-1} + P_{k-1} V0 until it settles

    Stops when the relative update drops below tol, or when the penalty mask no longer
    changes. The mask test starts at k = 2, so with accurate solves kappa >= 2 unless the
    start already meets tol.
    """
    free = ~system.dirichlet
    Y_prev = start
    P_prev = np.where(free, penalty_diag(Y_prev, system.V0, config.large), 0.0)

    for k in range(1, config.max_inner + 1):
        active = P_prev > 0.0
        rhs = W + theta_dt * system.jump(Y_prev)
        rhs[active] += P_prev[active] * system.V0[active]
        rhs[system.dirichlet] = 0.0

        Y, report = _penalized_solve(C, P_prev, rhs, Y_prev, config)
        state.solver_iterations += report.iterations

        P = np.where(free, penalty_diag(Y, system.V0, config.large), 0.0)
        update = np.max(np.abs(Y - Y_prev) / np.maximum(1.0, np.abs(Y)))
        if update < config.tol or (k >= 2 and np.array_equal(P > 0.0, active)):
            return Y, k
        Y_prev, P_prev = Y, P

    raise PenaltyIterationError(n, stage, config.max_inner)


def dirk_step(state: PricerState, config: DirkConfig, system: SemiDiscreteSystem,
              n: int) -> PricerState:
    """One DIRK-P step from t^{n-1} to t^n"""
    dt = state.dt(n)
    theta = config.theta
    v = state.v_prev
    C = _stage_matrix(system, theta * dt)
    start = start_vector(state, config, n)

    Av = system.apply(v)
    W1 = v + (1.0 - theta) * dt * Av
    Y_hat, kappa1 = _penalty_iteration(system, C, W1, theta * dt, start, config, state, n, 1)

    W2 = v + 0.5 * dt * Av + (0.5 - theta) * dt * system.apply(Y_hat)
    Z_hat, kappa2 = _penalty_iteration(system, C, W2, theta * dt, start, config, state, n, 2)

    state.advance(Z_hat, kappa1, kappa2)
    return state


def be_p_step(state: PricerState, config: DirkConfig, system: SemiDiscreteSystem,
              n: int) -> PricerState:
    """Penalized backward Euler: the first DIRK-P stage with theta = 1, taken as V^n"""
    dt = state.dt(n)
    C = _stage_matrix(system, dt)
    start = start_vector(state, config, n)
    Y_hat, kappa1 = _penalty_iteration(system, C, state.v_prev.copy(), dt, start, config, state, n, 1)
    state.advance(Y_hat, kappa1, 0)
    return state


@dataclass(frozen=True, eq=False)
class PricingResult:
    """Outcome of one American pricing run"""
    V: np.ndarray
    V0: np.ndarray
    grid: SpatialGrid
    times: np.ndarray
    kappa1: Tuple[int, ...]
    kappa2: Tuple[int, ...]
    solver_iterations: int
    wall_time: float
    config: DirkConfig

    @property
    def constraint_gap(self) -> float:
        """min(V - V0); negative values are penalty-sized constraint violations"""
        return float(np.min(self.V - self.V0))

    @property
    def kappa_total(self) -> int:
        return int(sum(self.kappa1) + sum(self.kappa2))

    def to_dict(self) -> dict:
        return {
            **self.config.to_dict(),
            'm': self.grid.m,
            'kappa1_max': max(self.kappa1, default=0),
            'kappa2_max': max(self.kappa2, default=0),
            'kappa_total': self.kappa_total,
            'solver_iterations': self.solver_iterations,
            'wall_time': self.wall_time,
            'constraint_gap': self.constraint_gap,
        }


def run_steps(system: SemiDiscreteSystem, config: DirkConfig, times: np.ndarray,
              v_init: Optional[np.ndarray] = None) -> PricerState:
    """March from times[0] to times[-1]; zero-length steps are skipped"""
    v = system.V0.copy() if v_init is None else np.array(v_init, dtype=float)
    v[system.dirichlet] = 0.0
    state = PricerState(v_prev=v, times=times)

    for n in range(1, len(times)):
        if state.dt(n) == 0.0:
            continue
        use_be = config.variant is Variant.BE or (config.damping and n <= 2)
        step = be_p_step if use_be else dirk_step
        before = state.solver_iterations
        step(state, config, system, n)
        logger.debug(f"step n={n} dt={state.dt(n):.6g} kappa1={state.kappa1[-1]} "
                     f"kappa2={state.kappa2[-1]} solver_iterations={state.solver_iterations - before}")
    return state


def solve_american(params: KouParams, grid: SpatialGrid, config: DirkConfig,
                   T: Optional[float] = None, system: Optional[SemiDiscreteSystem] = None) -> PricingResult:
    """Price the American put-on-the-average on the grid

    Args:
        params: model and contract parameters
        grid: spatial grid
        config: time-stepping settings
        T: maturity override (defaults to params.T; 0 returns V0)
        system: prebuilt operators, reused across runs on the same grid

    Returns:
        PricingResult with the time-T vector and iteration statistics
    """
    started = time.perf_counter()
    system = system or build_system(params, grid)
    T = params.T if T is None else T
    times = time_grid(config.N, T, config.time_grid)

    logger.info(f"Pricing {config.variant.label} m={grid.m} N={config.N} T={T}")
    state = run_steps(system, config, times)
    wall_time = time.perf_counter() - started

    result = PricingResult(
        V=state.v_prev,
        V0=system.V0,
        grid=grid,
        times=times,
        kappa1=tuple(state.kappa1),
        kappa2=tuple(state.kappa2),
        solver_iterations=state.solver_iterations,
        wall_time=wall_time,
        config=config,
    )
    logger.info(f"Finished in {wall_time:.2f}s, kappa_total={result.kappa_total}, "
                f"solver_iterations={result.solver_iterations}")
    return result
