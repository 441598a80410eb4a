"""
Run configuration and result records for the Kou PIDCP engine
Covers method variants, time-stepping settings, study settings and error records
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

from models.kou_model import KouParams


class Variant(Enum):
    """DIRK-P method instances plus the plain penalized backward Euler scheme"""
    DIRKA = "a"
    DIRKB = "b"
    DIRKC = "c"
    DIRKD = "d"
    BE = "be"

    @property
    def theta(self) -> float:
        return {
            Variant.DIRKA: 1.0 - 0.5 * math.sqrt(2.0),
            Variant.DIRKB: 1.0 / 3.0,
            Variant.DIRKC: 1.0,
            Variant.DIRKD: 1.0 + 0.5 * math.sqrt(2.0),
            Variant.BE: 1.0,
        }[self]

    @property
    def damping(self) -> bool:
        """Whether the first two steps are replaced by BE-P"""
        return self in (Variant.DIRKB, Variant.DIRKC, Variant.BE)

    @property
    def l_stable(self) -> bool:
        return self in (Variant.DIRKA, Variant.DIRKD, Variant.BE)

    @property
    def label(self) -> str:
        return "BE" if self is Variant.BE else f"DIRK{self.value}"

    @classmethod
    def parse(cls, value) -> 'Variant':
        if isinstance(value, Variant):
            return value
        text = str(value).strip().lower()
        if text.startswith("dirk"):
            text = text[4:]
        text = text.removesuffix("-p")
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"Unknown method variant: {value!r} (expected a, b, c, d or be)")


DIRK_VARIANTS = (Variant.DIRKA, Variant.DIRKB, Variant.DIRKC, Variant.DIRKD)


class Quantity(Enum):
    """Quantities whose errors and point values are reported"""
    VALUE = "value"
    DELTA1 = "delta1"
    DELTA2 = "delta2"
    GAMMA11 = "gamma11"
    GAMMA12 = "gamma12"
    GAMMA22 = "gamma22"


@dataclass(frozen=True)
class DirkConfig:
    """Time-stepping settings of one DIRK-P run"""
    theta: float
    N: int
    damping: bool = False
    large: float = 1e7
    tol: float = 1e-7
    max_inner: int = 100
    variant: Variant = Variant.DIRKA
    start: str = "extrapolate"       # or "constant"
    time_grid: str = "quadratic"     # or "uniform"
    solver_tol: float = 1e-10
    solver_max_iter: int = 400

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.N < 1:
            raise ValueError(f"N must be at least 1, got {self.N}")
        if self.variant is not Variant.BE and not self.damping and (
                math.isclose(self.theta, 1.0 / 3.0) or math.isclose(self.theta, 1.0)):
            raise ValueError(f"theta={self.theta} is not L-stable and requires backward Euler damping")
        if self.large <= 0 or self.tol <= 0:
            raise ValueError("large and tol must be positive")
        if self.max_inner < 1:
            raise ValueError(f"max_inner must be at least 1, got {self.max_inner}")
        if self.start not in ("extrapolate", "constant"):
            raise ValueError(f"Unknown start strategy: {self.start!r}")
        if self.time_grid not in ("quadratic", "uniform"):
            raise ValueError(f"Unknown time grid: {self.time_grid!r}")

    @classmethod
    def for_variant(cls, variant, N: int, **overrides) -> 'DirkConfig':
        variant = Variant.parse(variant)
        return cls(theta=variant.theta, N=N, damping=variant.damping, variant=variant, **overrides)

    def to_dict(self) -> dict:
        return {
            'variant': self.variant.label,
            'theta': self.theta,
            'N': self.N,
            'damping': self.damping,
            'large': self.large,
            'tol': self.tol,
            'max_inner': self.max_inner,
            'start': self.start,
            'time_grid': self.time_grid,
        }


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run needs: model, grid, method and study settings"""
    params: KouParams = field(default_factory=KouParams)
    m: int = 100
    smax_multiple: float = 10.0
    variant: Variant = Variant.DIRKA
    N: int = 50
    N_list: Tuple[int, ...] = (10, 20, 40, 80)
    roi_low: float = 0.9
    roi_high: float = 1.1
    output_dir: Path = Path("output")
    cache_dir: Path = Path(".cache/reference")
    reference_N: int = 500
    reference_variant: Variant = Variant.DIRKA
    ladder: Tuple[Tuple[int, int], ...] = ((100, 50), (200, 100), (400, 200))
    time_grid: str = "quadratic"
    start: str = "extrapolate"

    def __post_init__(self):
        if self.m < 3:
            raise ValueError(f"m must be at least 3, got {self.m}")
        if self.smax_multiple <= 2.0:
            raise ValueError(f"Smax must exceed 2K, got smax_multiple={self.smax_multiple}")
        if self.N < 1 or self.reference_N < 1 or any(n < 1 for n in self.N_list):
            raise ValueError("All time step counts must be at least 1")
        if not 0.0 < self.roi_low < self.roi_high < self.smax_multiple:
            raise ValueError(
                f"ROI ({self.roi_low}K, {self.roi_high}K) must lie strictly inside (0, Smax)")

    @property
    def smax(self) -> float:
        return self.smax_multiple * self.params.K

    @property
    def roi(self) -> Tuple[float, float]:
        """ROI bounds in currency units; the ROI is the open square (low, high)^2"""
        K = self.params.K
        return round(self.roi_low * K, 10), round(self.roi_high * K, 10)

    def dirk_config(self, variant: Optional[Variant] = None, N: Optional[int] = None) -> DirkConfig:
        return DirkConfig.for_variant(
            variant or self.variant, N or self.N, start=self.start, time_grid=self.time_grid)

    def with_overrides(self, **changes) -> 'RunConfig':
        changes = {key: value for key, value in changes.items() if value is not None}
        return replace(self, **changes)


@dataclass(frozen=True)
class ErrorRecord:
    """Max-norm error of one quantity on the ROI for one (m, N, variant) run"""
    m: int
    N: int
    variant: str
    quantity: Quantity
    error: float

    def __post_init__(self):
        if not self.error >= 0.0:
            raise ValueError(f"error must be nonnegative, got {self.error}")

    def to_dict(self) -> dict:
        return {
            'variant': self.variant,
            'm': self.m,
            'N': self.N,
            'quantity': self.quantity.value,
            'error': self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'ErrorRecord':
        return cls(
            m=int(data['m']),
            N=int(data['N']),
            variant=str(data['variant']),
            quantity=Quantity(data['quantity']),
            error=float(data['error']),
        )


def default_points(K: float) -> List[Tuple[float, float]]:
    """The five reporting points with s1, s2 in {0.9K, K, 1.1K}"""
    lo, mid, hi = round(0.9 * K, 10), float(K), round(1.1 * K, 10)
    return [(lo, lo), (mid, lo), (mid, mid), (mid, hi), (hi, hi)]
