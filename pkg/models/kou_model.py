"""
Two-asset Kou jump-diffusion model for the American put-on-the-average engine
Holds the validated parameter set, the joint jump density and the derived jump moments
"""

from dataclasses import dataclass, fields
from typing import Any, Dict

import numpy as np

# Config file keys, in the order they are documented. "lambda" is stored as `lam`.
PARAM_KEYS = (
    "sigma1", "sigma2", "r", "rho", "lambda", "p1", "p2",
    "eta_p1", "eta_q1", "eta_p2", "eta_q2", "K", "T",
)


def expected_relative_jump_size(p: float, eta_p: float, eta_q: float) -> float:
    """Expected relative jump size E[Y] - 1 of a log-double-exponential jump

    Args:
        p: probability of an upward jump (q = 1 - p)
        eta_p: rate of the upward exponential, must exceed 1
        eta_q: rate of the downward exponential, must be positive

    Returns:
        zeta = p*eta_p/(eta_p - 1) + q*eta_q/(eta_q + 1) - 1
    """
    if eta_p <= 1.0:
        raise ValueError(f"eta_p must be > 1 for a finite jump moment, got {eta_p}")
    if eta_q <= 0.0:
        raise ValueError(f"eta_q must be > 0, got {eta_q}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    q = 1.0 - p
    return p * eta_p / (eta_p - 1.0) + q * eta_q / (eta_q + 1.0) - 1.0


def jump_density_factor(y, p: float, eta_p: float, eta_q: float):
    """One-dimensional log-double-exponential density of the jump ratio y > 0

    y >= 1 takes the heavy-tail branch p*eta_p*y^(-eta_p-1), 0 < y < 1 the branch
    q*eta_q*y^(eta_q-1).
    """
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        raise ValueError("jump ratios must be strictly positive")
    q = 1.0 - p
    with np.errstate(over='ignore', divide='ignore'):
        out = np.where(y >= 1.0,
                       p * eta_p * y ** (-eta_p - 1.0),
                       q * eta_q * y ** (eta_q - 1.0))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class JumpMoments:
    """Expected relative jump sizes of both assets"""
    zeta1: float
    zeta2: float

    def to_dict(self) -> dict:
        return {'zeta1': self.zeta1, 'zeta2': self.zeta2}


@dataclass(frozen=True)
class KouParams:
    """Model and contract parameters of the two-asset Kou model

    Rates are per year, volatilities per sqrt(year), K in currency units and T in years.
    Validation happens on construction; downstream code assumes a valid instance.
    """
    sigma1: float = 0.30
    sigma2: float = 0.40
    r: float = 0.01
    rho: float = 0.50
    lam: float = 0.50
    p1: float = 0.40
    p2: float = 0.60
    eta_p1: float = 1.0 / 0.20
    eta_q1: float = 1.0 / 0.15
    eta_p2: float = 1.0 / 0.18
    eta_q2: float = 1.0 / 0.14
    K: float = 100.0
    T: float = 0.5

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value):
                raise ValueError(f"Parameter {f.name} must be finite, got {value}")
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError(f"Volatilities must be positive, got sigma1={self.sigma1}, sigma2={self.sigma2}")
        if self.lam < 0:
            raise ValueError(f"Jump intensity lambda must be nonnegative, got {self.lam}")
        if self.K <= 0:
            raise ValueError(f"Strike K must be positive, got {self.K}")
        if self.T <= 0:
            raise ValueError(f"Maturity T must be positive, got {self.T}")
        for name in ('p1', 'p2'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"Probability {name} must lie in [0, 1], got {value}")
        for name in ('eta_p1', 'eta_p2'):
            value = getattr(self, name)
            if value <= 1.0:
                raise ValueError(f"Rate {name} must exceed 1, got {value}")
        for name in ('eta_q1', 'eta_q2'):
            value = getattr(self, name)
            if value <= 0.0:
                raise ValueError(f"Rate {name} must be positive, got {value}")
        if abs(self.rho) > 1.0:
            raise ValueError(f"Correlation rho must satisfy |rho| <= 1, got {self.rho}")

    @property
    def q1(self) -> float:
        return 1.0 - self.p1

    @property
    def q2(self) -> float:
        return 1.0 - self.p2

    @property
    def moments(self) -> JumpMoments:
        return JumpMoments(
            zeta1=expected_relative_jump_size(self.p1, self.eta_p1, self.eta_q1),
            zeta2=expected_relative_jump_size(self.p2, self.eta_p2, self.eta_q2),
        )

    def to_dict(self) -> Dict[str, float]:
        """Convert to the config-file key names"""
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data['lambda'] = data.pop('lam')
        return {key: data[key] for key in PARAM_KEYS}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'KouParams':
        """Create from config-file keys; missing keys keep the default parameter set"""
        unknown = set(data) - set(PARAM_KEYS)
        if unknown:
            raise ValueError(f"Unknown model parameter keys: {sorted(unknown)}")
        kwargs = {('lam' if key == 'lambda' else key): float(value) for key, value in data.items()}
        return cls(**kwargs)


def jump_density(y1, y2, params: KouParams):
    """Joint density f(y1, y2) of the two independent jump ratios

    The four branches of the joint density are products of the one-dimensional factors,
    with y = 1 assigned to the heavy-tail branch in each direction.
    """
    f1 = jump_density_factor(y1, params.p1, params.eta_p1, params.eta_q1)
    f2 = jump_density_factor(y2, params.p2, params.eta_p2, params.eta_q2)
    return f1 * f2
