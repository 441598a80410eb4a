"""
Study module for the Kou PIDCP engine
Handles reference runs, temporal error measurement, convergence studies,
point tables with numerical orders, and exercise-region and surface data
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from models.run_models import (DIRK_VARIANTS, ErrorRecord, Quantity, RunConfig, Variant,
                               default_points)
from repositories.reference_repository import ReferenceRepository, settings_hash
from utils.dirk_pricer import PricingResult, SemiDiscreteSystem, build_system, solve_american
from utils.greeks_eval import compute_greeks, point_values, surface_of
from utils.spatial_grid import SpatialGrid, build_grid

logger = logging.getLogger(__name__)

EXERCISE_RTOL = 1e-6
SIG_DIGITS = 9


def _round_sig(x: float) -> float:
    """Round to the 9 significant digits written to CSV"""
    return float(f"{x:.{SIG_DIGITS}g}")


def roi_mask(grid: SpatialGrid, roi: Tuple[float, float]) -> np.ndarray:
    """Matrix mask [i, j] of nodes strictly inside the open square roi^2"""
    lo, hi = roi
    in1 = (grid.nodes1 > lo) & (grid.nodes1 < hi)
    in2 = (grid.nodes2 > lo) & (grid.nodes2 < hi)
    return in1[:, None] & in2[None, :]


def temporal_error(V_ref: np.ndarray, V_hat: np.ndarray, grid: SpatialGrid,
                   roi: Tuple[float, float], quantity: Quantity = Quantity.VALUE) -> float:
    """Max-norm difference on the ROI nodes of the value or of one Greek"""
    V_ref = np.asarray(V_ref, dtype=float)
    V_hat = np.asarray(V_hat, dtype=float)
    if V_ref.shape != V_hat.shape:
        raise ValueError(f"Vectors live on different grids: {V_ref.shape} vs {V_hat.shape}")
    mask = roi_mask(grid, roi)
    if not mask.any():
        raise ValueError(f"No grid node lies strictly inside the ROI {roi}")
    diff = surface_of(V_hat, grid, quantity) - surface_of(V_ref, grid, quantity)
    return float(np.max(np.abs(diff[mask])))


def reference_settings(config: RunConfig, m: int) -> Dict:
    """Everything the reference vector depends on"""
    return {
        'params': config.params.to_dict(),
        'm': m,
        'smax_multiple': config.smax_multiple,
        'N': config.reference_N,
        'variant': config.reference_variant.value,
        'time_grid': config.time_grid,
        'start': config.start,
    }


def price(config: RunConfig, m: Optional[int] = None, N: Optional[int] = None,
          variant: Optional[Variant] = None, grid: Optional[SpatialGrid] = None,
          system: Optional[SemiDiscreteSystem] = None) -> PricingResult:
    """One pricing run on the configured (or given) grid"""
    m = m or config.m
    grid = grid or build_grid(m, config.params.K, config.smax)
    return solve_american(config.params, grid, config.dirk_config(variant, N), system=system)


def run_reference(config: RunConfig, m: Optional[int] = None,
                  repository: Optional[ReferenceRepository] = None,
                  system: Optional[SemiDiscreteSystem] = None) -> np.ndarray:
    """Reference vector (long-N run) for grid size m, loaded from cache when present"""
    m = m or config.m
    repository = repository or ReferenceRepository(config.cache_dir)
    key = settings_hash(reference_settings(config, m))

    cached = repository.load(m, key)
    if cached is not None:
        logger.info(f"Reference m={m} loaded from cache ({key[:16]})")
        return cached

    grid = build_grid(m, config.params.K, config.smax)
    result = price(config, m=m, N=config.reference_N, variant=config.reference_variant,
                   grid=grid, system=system)
    repository.save(result.V, m, key)
    logger.info(f"Reference m={m} computed in {result.wall_time:.1f}s, "
                f"max kappa={max(result.kappa1 + result.kappa2, default=0)}")
    return result.V


def fit_slope(N_values: Sequence[int], errors: Sequence[float]) -> Tuple[float, float]:
    """Least-squares slope of log E against log(1/N) and the fitted E(100)*100^2"""
    N_values = np.asarray(N_values, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(N_values) < 2 or np.any(errors <= 0.0):
        raise ValueError("Slope fit needs at least two strictly positive errors")
    slope, intercept = np.polyfit(np.log(1.0 / N_values), np.log(errors), 1)
    constant = float(np.exp(intercept + slope * np.log(1.0 / 100.0)) * 100.0 ** 2)
    return float(slope), constant


def records_frame(records: Iterable[ErrorRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.to_dict() for r in records], columns=["variant", "m", "N", "quantity", "error"])


@dataclass(frozen=True)
class ConvergenceStudy:
    records: List[ErrorRecord]
    summary: pd.DataFrame

    def errors_frame(self) -> pd.DataFrame:
        return records_frame(self.records)


def summarize_errors(errors: pd.DataFrame) -> pd.DataFrame:
    """Slope and error constant per (variant, quantity) from an errors table"""
    rows = []
    for (variant, quantity), group in errors.groupby(['variant', 'quantity'], sort=False):
        group = group.sort_values('N')
        slope, constant = fit_slope(group['N'].to_numpy(), group['error'].to_numpy())
        rows.append({'variant': variant, 'quantity': quantity, 'slope': slope, 'constant': constant})
    return pd.DataFrame(rows, columns=['variant', 'quantity', 'slope', 'constant'])


def run_convergence_study(config: RunConfig, N_list: Optional[Iterable[int]] = None,
                          variants: Sequence[Variant] = DIRK_VARIANTS,
                          V_ref: Optional[np.ndarray] = None) -> ConvergenceStudy:
    """Temporal errors of every variant and N against the reference on the ROI"""
    N_list = tuple(N_list or config.N_list)
    grid = build_grid(config.m, config.params.K, config.smax)
    system = build_system(config.params, grid)
    V_ref = run_reference(config, system=system) if V_ref is None else V_ref

    records: List[ErrorRecord] = []
    for variant in variants:
        for N in N_list:
            result = price(config, N=N, variant=variant, grid=grid, system=system)
            for quantity in Quantity:
                error = _round_sig(temporal_error(V_ref, result.V, grid, config.roi, quantity))
                records.append(ErrorRecord(m=config.m, N=N, variant=variant.label,
                                           quantity=quantity, error=error))
            logger.info(f"{variant.label} N={N}: value error "
                        f"{records[-len(Quantity)].error:.3e}")

    return ConvergenceStudy(records=records, summary=summarize_errors(records_frame(records)))


def numerical_orders(values: pd.DataFrame) -> pd.DataFrame:
    """log2(|d_coarse| / |d_fine|) from successive differences along the (m, N) ladder"""
    rows = []
    for (s1, s2, quantity), group in values.groupby(['s1', 's2', 'quantity'], sort=False):
        group = group.sort_values('m')
        v = group['value'].to_numpy()
        ms = group['m'].to_numpy()
        d = np.diff(v)
        for idx in range(1, len(d)):
            with np.errstate(divide='ignore', invalid='ignore'):
                order = float(np.log2(np.abs(d[idx - 1]) / np.abs(d[idx])))
            rows.append({'s1': s1, 's2': s2, 'quantity': quantity, 'm': int(ms[idx + 1]), 'order': order})
    return pd.DataFrame(rows, columns=['s1', 's2', 'quantity', 'm', 'order'])


@dataclass(frozen=True)
class PointTable:
    values: pd.DataFrame
    orders: pd.DataFrame


def run_point_table(config: RunConfig, ladder: Optional[Sequence[Tuple[int, int]]] = None,
                    points: Optional[Sequence[Tuple[float, float]]] = None,
                    variant: Variant = Variant.DIRKA) -> PointTable:
    """Value and Greeks at the reporting points for each (m, N) rung, plus numerical orders"""
    ladder = tuple(ladder or config.ladder)
    points = list(points or default_points(config.params.K))
    rows = []
    for m, N in ladder:
        result = price(config, m=m, N=N, variant=variant)
        for entry in point_values(result.V, result.grid, points):
            for quantity in Quantity:
                rows.append({'m': m, 'N': N, 's1': entry['s1'], 's2': entry['s2'],
                             'quantity': quantity.value, 'value': entry[quantity.value]})
        logger.info(f"Point table rung m={m} N={N} done in {result.wall_time:.1f}s")
    values = pd.DataFrame(rows, columns=['m', 'N', 's1', 's2', 'quantity', 'value'])
    return PointTable(values=values, orders=numerical_orders(values))


def exercise_mask(V_hat: np.ndarray, V0: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Matrix mask of nodes where V_hat - V0 <= 1e-6 * max(1, V0)"""
    V_hat = np.asarray(V_hat, dtype=float)
    V0 = np.asarray(V0, dtype=float)
    flag = (V_hat - V0) <= EXERCISE_RTOL * np.maximum(1.0, V0)
    return grid.to_matrix(flag)


@dataclass(frozen=True)
class ExerciseRegion:
    frame: pd.DataFrame
    fraction: float
    roi_hit: bool

    def to_dict(self) -> dict:
        return {'fraction': self.fraction, 'roi_hit': self.roi_hit}


def emit_exercise_region(V_hat: np.ndarray, V0: np.ndarray, grid: SpatialGrid,
                         roi: Optional[Tuple[float, float]] = None) -> ExerciseRegion:
    """Exercise flags as (s1, s2, flag) rows plus a short summary"""
    mask = exercise_mask(V_hat, V0, grid)
    S1, S2 = grid.mesh()
    frame = pd.DataFrame({
        's1': grid.to_vector(S1),
        's2': grid.to_vector(S2),
        'flag': grid.to_vector(mask).astype(int),
    })
    roi_hit = bool((mask & roi_mask(grid, roi)).any()) if roi is not None else False
    return ExerciseRegion(frame=frame, fraction=float(mask.mean()), roi_hit=roi_hit)


def surface_frames(V: np.ndarray, grid: SpatialGrid, window: Optional[float] = None
                   ) -> Dict[str, pd.DataFrame]:
    """Long-format (s1, s2, value) tables of the value and the Greeks on [0, window]^2"""
    window = 2.0 * grid.K if window is None else window
    keep1 = grid.nodes1 <= window
    keep2 = grid.nodes2 <= window
    S1, S2 = grid.mesh()
    greeks = compute_greeks(V, grid)
    frames = {}
    for quantity in Quantity:
        surface = surface_of(V, grid, quantity, greeks)
        sub = np.ix_(keep1, keep2)
        frames[quantity.value] = pd.DataFrame({
            's1': S1[sub].ravel(order='F'),
            's2': S2[sub].ravel(order='F'),
            'value': surface[sub].ravel(order='F'),
        })
    return frames
