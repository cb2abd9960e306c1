# polytope/measures.py
"""
Measures defined on sum pmfs of S_d / S_d(p).

Expectation measures E[phi(Y)] are affine in the pmf, so over a polytope
they are bounded by their values on the rays and their exact distribution
can be computed simplex by simplex. Quantiles and entropy are not, and are
only studied by sampling.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Any, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.stats import entropy as shannon_entropy

from polytope.errors import DimensionError, DomainError
from polytope.rays import RayDensity, SumPmf, enumerate_rays, integer_mean

logger = logging.getLogger(__name__)


class MeasureKind(str, Enum):
    CROSS_MOMENT = 'cross'
    RAW_MOMENT = 'moment'
    ENTROPIC_RISK = 'entropic'
    EXCESS_LOSS = 'excess'
    QUANTILE = 'quantile'
    ENTROPY = 'entropy'
    CORRELATION = 'correlation'
    UTILITY = 'utility'


# Affine in the pmf (for correlation: once p is fixed)
AFFINE_KINDS = {
    MeasureKind.CROSS_MOMENT,
    MeasureKind.RAW_MOMENT,
    MeasureKind.EXCESS_LOSS,
    MeasureKind.UTILITY,
    MeasureKind.CORRELATION,
}


@dataclass(frozen=True)
class MeasureSpec:
    """A measure and its parameter: alpha, k, gamma, quantile level or a phi table"""
    kind: MeasureKind
    param: Optional[float] = None
    table: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        kind = MeasureKind(self.kind)
        object.__setattr__(self, 'kind', kind)
        if kind == MeasureKind.CROSS_MOMENT:
            if self.param is None or self.param != int(self.param) or self.param < 1:
                raise DomainError(f"cross moment order must be a positive integer, got {self.param}")
        elif kind == MeasureKind.RAW_MOMENT:
            if self.param is None or self.param < 0:
                raise DomainError(f"moment order must be nonnegative, got {self.param}")
        elif kind == MeasureKind.ENTROPIC_RISK:
            if self.param is None or self.param <= 0:
                raise DomainError(f"entropic risk needs gamma > 0, got {self.param}")
        elif kind == MeasureKind.EXCESS_LOSS:
            if self.param is None:
                raise DomainError("excess loss needs a threshold k")
        elif kind == MeasureKind.QUANTILE:
            if self.param is None or not 0 < self.param < 1:
                raise DomainError(f"quantile level must lie in (0, 1), got {self.param}")
        elif kind == MeasureKind.UTILITY:
            if not self.table:
                raise DomainError("utility needs tabulated phi values")
            object.__setattr__(self, 'table', tuple(float(v) for v in self.table))

    @property
    def label(self) -> str:
        if self.kind == MeasureKind.UTILITY:
            return 'utility'
        if self.param is None:
            return self.kind.value
        return f"{self.kind.value}:{self.param:g}"

    @property
    def is_affine(self) -> bool:
        return self.kind in AFFINE_KINDS

    @property
    def is_expectation(self) -> bool:
        """Affine, or a monotone transform of an affine measure"""
        return self.is_affine or self.kind == MeasureKind.ENTROPIC_RISK

    def evaluate(self, pY: SumPmf) -> float:
        kind = self.kind
        if kind == MeasureKind.CROSS_MOMENT:
            return cross_moment(pY, int(self.param))
        if kind == MeasureKind.RAW_MOMENT:
            return raw_moment(pY, self.param)
        if kind == MeasureKind.ENTROPIC_RISK:
            return entropic_risk(pY, self.param)
        if kind == MeasureKind.EXCESS_LOSS:
            return excess_loss(pY, self.param)
        if kind == MeasureKind.QUANTILE:
            return float(quantile(pY, self.param))
        if kind == MeasureKind.ENTROPY:
            return entropy(pY)
        if kind == MeasureKind.CORRELATION:
            return correlation_of(pY)
        return expected_utility(pY, self.table)

    def linear_value(self, pY: SumPmf) -> float:
        """
        The affine functional behind the measure: the measure itself, or
        E[exp(-gamma Y)] for the entropic risk.
        """
        if self.kind == MeasureKind.ENTROPIC_RISK:
            return exponential_moment(pY, self.param)
        if not self.is_affine:
            raise DomainError(f"{self.label} is not an expectation measure")
        return self.evaluate(pY)


def parse_measure(text: str) -> MeasureSpec:
    """
    Parse 'cross:2', 'moment:3', 'entropic:0.5', 'excess:1', 'quantile:0.9',
    'entropy', 'correlation' or 'utility:v0,v1,...,vd'
    """
    name, _, arg = text.strip().partition(':')
    try:
        kind = MeasureKind(name.strip().lower())
    except ValueError:
        raise DomainError(f"unknown measure {name!r}")
    if kind == MeasureKind.UTILITY:
        try:
            table = tuple(float(v) for v in arg.split(','))
        except ValueError:
            raise DomainError(f"bad utility table {arg!r}")
        return MeasureSpec(kind, table=table)
    if kind in (MeasureKind.ENTROPY, MeasureKind.CORRELATION):
        return MeasureSpec(kind)
    if not arg:
        raise DomainError(f"measure {name!r} needs a parameter, e.g. {name}:2")
    try:
        return MeasureSpec(kind, float(arg))
    except ValueError:
        raise DomainError(f"bad parameter {arg!r} for measure {name!r}")


def cross_moment(pY: SumPmf, alpha: int) -> float:
    """mu_alpha = E[X_1 ... X_alpha] = sum_{k>=alpha} C(d-alpha, k-alpha)/C(d, k) p_k"""
    d = pY.d
    if not 1 <= alpha <= d:
        raise DomainError(f"cross moment order must lie in 1..{d}, got {alpha}")
    k = np.arange(alpha, d + 1)
    # C(d-a, k-a)/C(d, k) = k!(d-a)! / ((k-a)! d!), in logs so large d stays finite
    log_coefficients = gammaln(k + 1) - gammaln(k - alpha + 1) - gammaln(d + 1) + gammaln(d - alpha + 1)
    coefficients = np.exp(log_coefficients)
    return float(coefficients @ pY.probs[alpha:])


def raw_moment(pY: SumPmf, k: float) -> float:
    """E[Y^k]"""
    if k < 0:
        raise DomainError(f"moment order must be nonnegative, got {k}")
    return float(np.power(pY.support.astype(float), k) @ pY.probs)


def second_moment_identity(pY: SumPmf) -> float:
    """E[Y^2] - (pd + d(d-1) mu_2); vanishes for every pmf"""
    d = pY.d
    mean = pY.mean()
    mu2 = cross_moment(pY, 2) if d >= 2 else 0.0
    return raw_moment(pY, 2) - (mean + d * (d - 1) * mu2)


def exponential_moment(pY: SumPmf, gamma: float) -> float:
    """E[exp(-gamma Y)]"""
    return float(np.exp(-gamma * pY.support) @ pY.probs)


def entropic_risk(pY: SumPmf, gamma: float) -> float:
    """(1/gamma) log E[exp(-gamma Y)]"""
    if gamma <= 0:
        raise DomainError(f"entropic risk needs gamma > 0, got {gamma}")
    mask = pY.probs > 0
    log_mgf = logsumexp(-gamma * pY.support[mask], b=pY.probs[mask])
    return float(log_mgf / gamma)


def excess_loss(pY: SumPmf, k: float) -> float:
    """E[(Y - k)^+]"""
    return float(np.maximum(pY.support - k, 0.0) @ pY.probs)


def expected_utility(pY: SumPmf, table: Sequence[float]) -> float:
    """E[phi(Y)] for tabulated phi(0), ..., phi(d)"""
    values = np.asarray(table, dtype=float)
    if values.shape[0] != pY.d + 1:
        raise DimensionError(f"utility table needs {pY.d + 1} values, got {values.shape[0]}")
    return float(values @ pY.probs)


def _mean_parameter(pY: SumPmf) -> float:
    p = pY.mean() / pY.d
    if not 0.0 < p < 1.0:
        raise DomainError(f"correlation undefined for mean {p} (zero variance)")
    return p


def correlation_of(pY: SumPmf) -> float:
    """Common pairwise correlation rho = (mu_2 - p^2) / (p q)"""
    if pY.d < 2:
        raise DomainError("correlation needs d >= 2")
    p = _mean_parameter(pY)
    return (cross_moment(pY, 2) - p * p) / (p * (1.0 - p))


def mu2_of_rho(p: float, rho: float) -> float:
    """mu_2 = rho p q + p^2"""
    if not 0.0 < p < 1.0:
        raise DomainError(f"mean must lie in (0, 1), got {p}")
    return rho * p * (1.0 - p) + p * p


def correlation_bounds(d: int, p: float) -> Tuple[float, float]:
    """Attainable correlation range (rho_min, 1) over E_d(p)"""
    if d < 2:
        raise DomainError("correlation needs d >= 2")
    if not 0.0 < p < 1.0:
        raise DomainError(f"mean must lie in (0, 1), got {p}")
    is_int, m = integer_mean(d, p)
    if is_int:
        return -1.0 / (d - 1), 1.0
    j1 = math.floor(m)
    mu2 = (-j1 * (j1 + 1) + 2 * j1 * m) / (d * (d - 1))
    return (mu2 - p * p) / (p * (1.0 - p)), 1.0


def quantile(pY: SumPmf, alpha: float) -> int:
    """inf {y : P(Y <= y) >= alpha}"""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {alpha}")
    # ties at CDF equality go to the lower point
    index = int(np.searchsorted(pY.cdf(), alpha - 1e-12, side='left'))
    return min(index, pY.d)


def quantile_bounds(d: int, p: float, alpha: float) -> Tuple[int, int]:
    """(min, max) of the alpha-quantile over the rays; bounds every pmf of S_d(p)"""
    values = [quantile(ray.pmf(), alpha) for ray in enumerate_rays(d, p)]
    return min(values), max(values)


def entropy(pY: SumPmf) -> float:
    """Shannon entropy -sum p_i log p_i, natural log"""
    return float(shannon_entropy(pY.probs))


def ray_values(rays: Sequence[RayDensity], measure: MeasureSpec, linear: bool = False) -> np.ndarray:
    """Measure evaluated at each ray (its affine functional when linear=True)"""
    if linear:
        return np.array([measure.linear_value(ray.pmf()) for ray in rays])
    return np.array([measure.evaluate(ray.pmf()) for ray in rays])


def ray_extrema(d: int, p: float, measure: MeasureSpec) -> Dict[str, Any]:
    """Min and max of a measure over the rays of S_d(p)"""
    rays = enumerate_rays(d, p)
    values = ray_values(rays, measure)
    lo, hi = int(np.argmin(values)), int(np.argmax(values))
    if not measure.is_expectation and measure.kind != MeasureKind.QUANTILE:
        logger.warning(f"{measure.label} is not an expectation measure: ray extrema need not bound it")
    return {
        'measure': measure.label,
        'min': float(values[lo]),
        'max': float(values[hi]),
        'argmin': rays[lo].to_dict(),
        'argmax': rays[hi].to_dict(),
    }
