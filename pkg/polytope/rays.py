# polytope/rays.py
"""
Extremal points of the exchangeable Bernoulli classes and the map H between
exchangeable mass functions and the mass functions of their coordinate sum.

An exchangeable pmf on {0,1}^d is stored compressed as (f_0, ..., f_d), f_j
being the common mass of every weight-j vector. The pmf of Y = X_1 + ... + X_d
is p_j = C(d, j) f_j. Fixing the mean p turns the sum pmfs into the polytope
S_d(p) = {p >= 0, sum p = 1, sum j p_j = p d}, whose vertices (the ray
densities) have support on two points straddling p d, plus a point mass at
p d when p d is an integer.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Any, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import comb

from config.settings import Config
from polytope.errors import DimensionError, DomainError, InvariantError

logger = logging.getLogger(__name__)

SUM_TOL = 1e-12
MEAN_TOL = 1e-6


def binomials(d: int) -> np.ndarray:
    """C(d, j) for j = 0..d as floats"""
    return comb(d, np.arange(d + 1), exact=False)


def _check_dimension(d: int):
    if not isinstance(d, (int, np.integer)) or isinstance(d, bool) or d < 1:
        raise DomainError(f"dimension must be a positive integer, got {d!r}")


def _check_mean(p: float):
    if not 0.0 < p < 1.0:
        raise DomainError(f"mean must lie in (0, 1), got {p!r}")


def _frozen(values, d: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.shape[0] != d + 1:
        raise DimensionError(f"{name} needs {d + 1} entries for d={d}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvariantError(f"{name} has non-finite entries")
    # round-off from convex combinations
    arr[(arr < 0) & (arr > -1e-14)] = 0.0
    if np.any(arr < 0):
        raise InvariantError(f"{name} has negative entries: {arr.min()}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SumPmf:
    """Mass function (p_0, ..., p_d) of Y = X_1 + ... + X_d"""
    d: int
    probs: np.ndarray

    def __post_init__(self):
        _check_dimension(self.d)
        probs = _frozen(self.probs, self.d, 'probs')
        total = math.fsum(probs)
        if abs(total - 1.0) > SUM_TOL:
            raise InvariantError(f"probs must sum to 1, got {total!r}")
        object.__setattr__(self, 'probs', probs)

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.d + 1)

    def mean(self) -> float:
        """E[Y]"""
        return float(self.support @ self.probs)

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probs)

    def to_list(self) -> List[float]:
        return [float(x) for x in self.probs]


@dataclass(frozen=True)
class ExchangeablePmf:
    """Compressed exchangeable pmf: f_j is the mass of each weight-j binary vector"""
    d: int
    f: np.ndarray

    def __post_init__(self):
        _check_dimension(self.d)
        f = _frozen(self.f, self.d, 'f')
        total = math.fsum(binomials(self.d) * f)
        if abs(total - 1.0) > SUM_TOL:
            raise InvariantError(f"sum of C(d,j) f_j must be 1, got {total!r}")
        object.__setattr__(self, 'f', f)

    def cell_mass(self, cell: Sequence[int]) -> float:
        """f^chi(x) for a binary vector x"""
        if len(cell) != self.d:
            raise DimensionError(f"cell of length {len(cell)} for d={self.d}")
        return float(self.f[int(sum(cell))])


@dataclass(frozen=True)
class RayDensity:
    """
    Vertex of S_d(p): two-point support (j1, j2) with masses
    ((j2 - pd)/(j2 - j1), (pd - j1)/(j2 - j1)), or a point mass at pd.
    """
    d: int
    p: float
    support: Tuple[int, ...]
    mass: Tuple[float, ...]

    def __post_init__(self):
        if len(self.support) not in (1, 2) or len(self.support) != len(self.mass):
            raise InvariantError(f"ray needs one or two support points, got {self.support}")
        if len(self.support) == 2:
            j1, j2 = self.support
            if not 0 <= j1 < j2 <= self.d:
                raise InvariantError(f"ray support must satisfy 0 <= j1 < j2 <= d, got {self.support}")
            if min(self.mass) <= 0.0 or abs(sum(self.mass) - 1.0) > SUM_TOL:
                raise InvariantError(f"ray masses {self.mass} are not a two-point distribution")
        else:
            if not 0 <= self.support[0] <= self.d:
                raise InvariantError(f"point mass at {self.support[0]} outside 0..{self.d}")
            if abs(self.mass[0] - 1.0) > SUM_TOL:
                raise InvariantError(f"point mass weight must be 1, got {self.mass[0]!r}")
        pd = self.p * self.d
        # the forced integer branch rounds p*d
        if abs(self.mean() - pd) > MEAN_TOL * max(1.0, pd):
            raise InvariantError(f"ray {self.support} has mean {self.mean()!r}, expected p*d = {pd!r}")

    @property
    def is_point_mass(self) -> bool:
        return len(self.support) == 1

    @property
    def j1(self) -> int:
        return self.support[0]

    @property
    def j2(self) -> int:
        return self.support[-1]

    def pmf(self) -> SumPmf:
        probs = np.zeros(self.d + 1)
        for j, m in zip(self.support, self.mass):
            probs[j] = m
        return SumPmf(self.d, probs)

    def mean(self) -> float:
        return float(sum(j * m for j, m in zip(self.support, self.mass)))

    def to_dict(self) -> Dict[str, Any]:
        return {'support': list(self.support), 'mass': list(self.mass)}


@dataclass(frozen=True)
class MixtureWeights:
    """Convex weights lambda_1..lambda_{n_p}; renormalized on construction"""
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.size == 0:
            raise InvariantError("mixture weights are empty")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvariantError("mixture weights must be finite and nonnegative")
        total = w.sum()
        if total <= 0:
            raise InvariantError("mixture weights sum to zero")
        w = w / total
        w.setflags(write=False)
        object.__setattr__(self, 'weights', w)

    def __len__(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def unit(cls, n: int, index: int) -> 'MixtureWeights':
        w = np.zeros(n)
        w[index] = 1.0
        return cls(w)

    @classmethod
    def uniform(cls, n: int) -> 'MixtureWeights':
        return cls(np.full(n, 1.0 / n))


def integer_mean(d: int, p: float, integer_branch: Optional[bool] = None) -> Tuple[bool, float]:
    """
    Decide whether p*d is an integer. Returns (is_integer, m) where m is the
    rounded integer on the integer branch and p*d otherwise.
    """
    pd = p * d
    nearest = round(pd)
    detected = abs(pd - nearest) <= Config.INT_TOL * max(1.0, abs(pd))
    if integer_branch is None:
        integer_branch = detected
    if integer_branch:
        if abs(pd - nearest) > MEAN_TOL * max(1.0, abs(pd)):
            raise DomainError(f"p*d = {pd} is not an integer, cannot force the integer branch")
        return True, float(nearest)
    return False, pd


def _support_ranges(d: int, m: float) -> Tuple[range, range]:
    return range(0, math.ceil(m)), range(math.floor(m) + 1, d + 1)


def enumerate_rays(d: int, p: float, integer_branch: Optional[bool] = None) -> List[RayDensity]:
    """All ray densities of S_d(p), lexicographic in (j1, j2), point mass last"""
    _check_dimension(d)
    _check_mean(p)
    is_int, m = integer_mean(d, p, integer_branch)
    low, high = _support_ranges(d, m)

    rays = []
    for j1 in low:
        for j2 in high:
            mass1 = (j2 - m) / (j2 - j1)
            mass2 = (m - j1) / (j2 - j1)
            rays.append(RayDensity(d, p, (j1, j2), (mass1, mass2)))
    if is_int:
        rays.append(RayDensity(d, p, (int(m),), (1.0,)))

    logger.debug(f"Enumerated {len(rays)} rays for d={d}, p={p}")
    return rays


def ray_count(d: int, p: float, integer_branch: Optional[bool] = None) -> int:
    """Number of ray densities of S_d(p), in closed form"""
    _check_dimension(d)
    _check_mean(p)
    is_int, m = integer_mean(d, p, integer_branch)
    if is_int:
        # d^2 p (1 - p) + 1 with pd = m
        return int(m) * (d - int(m)) + 1
    j1_max = math.floor(m)
    return (j1_max + 1) * (d - j1_max)


def min_mu2_ray(d: int, p: float, integer_branch: Optional[bool] = None) -> RayDensity:
    """
    Ray with the smallest second cross moment: the point mass at pd, or the
    two-point ray on the integers adjacent to pd. Built directly so it is
    usable when full enumeration is out of reach.
    """
    _check_dimension(d)
    _check_mean(p)
    is_int, m = integer_mean(d, p, integer_branch)
    if is_int:
        return RayDensity(d, p, (int(m),), (1.0,))
    j1 = math.floor(m)
    j2 = j1 + 1
    return RayDensity(d, p, (j1, j2), ((j2 - m) / (j2 - j1), (m - j1) / (j2 - j1)))


def frechet_upper_ray(d: int, p: float) -> RayDensity:
    """Two-point ray on {0, d}: all coordinates equal, correlation 1"""
    _check_dimension(d)
    _check_mean(p)
    return RayDensity(d, p, (0, d), (1.0 - p, p))


def map_H(f: ExchangeablePmf) -> SumPmf:
    """p_j = C(d, j) f_j"""
    return SumPmf(f.d, binomials(f.d) * f.f)


def map_H_inv(pY: SumPmf) -> ExchangeablePmf:
    """f_j = p_j / C(d, j)"""
    return ExchangeablePmf(pY.d, pY.probs / binomials(pY.d))


def exchangeable_simplex_vertices(d: int) -> List[ExchangeablePmf]:
    """Extremal points g'_0..g'_d of E_d: mass 1/C(d,j) on every weight-j vector"""
    _check_dimension(d)
    coefficients = binomials(d)
    vertices = []
    for j in range(d + 1):
        f = np.zeros(d + 1)
        f[j] = 1.0 / coefficients[j]
        vertices.append(ExchangeablePmf(d, f))
    return vertices


def _common_class(rays: Sequence[RayDensity]) -> Tuple[int, float]:
    if not rays:
        raise DimensionError("no rays given")
    d, p = rays[0].d, rays[0].p
    for ray in rays[1:]:
        if ray.d != d or abs(ray.p - p) > 1e-15:
            raise DimensionError(f"rays from different classes: (d={d}, p={p}) and (d={ray.d}, p={ray.p})")
    return d, p


def mixture_pmf(rays: Sequence[RayDensity], weights: MixtureWeights) -> SumPmf:
    """Convex combination sum_j lambda_j r_j"""
    d, _ = _common_class(rays)
    if len(weights) != len(rays):
        raise DimensionError(f"{len(weights)} weights for {len(rays)} rays")
    probs = np.zeros(d + 1)
    for ray, w in zip(rays, weights.weights):
        if w == 0.0:
            continue
        for j, m in zip(ray.support, ray.mass):
            probs[j] += w * m
    return SumPmf(d, probs)


@dataclass(frozen=True)
class RayMixture:
    """A mixture over an explicit subset of the rays of one class"""
    rays: Tuple[RayDensity, ...]
    weights: MixtureWeights = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, 'rays', tuple(self.rays))
        _common_class(self.rays)
        if self.weights is None:
            object.__setattr__(self, 'weights', MixtureWeights.uniform(len(self.rays)))
        if len(self.weights) != len(self.rays):
            raise DimensionError(f"{len(self.weights)} weights for {len(self.rays)} rays")

    @property
    def d(self) -> int:
        return self.rays[0].d

    @property
    def p(self) -> float:
        return self.rays[0].p

    def pmf(self) -> SumPmf:
        return mixture_pmf(self.rays, self.weights)

    def dense(self, all_rays: Sequence[RayDensity]) -> MixtureWeights:
        """Scatter the weights onto a full enumeration of the same class"""
        index = {ray.support: i for i, ray in enumerate(all_rays)}
        dense = np.zeros(len(all_rays))
        for ray, w in zip(self.rays, self.weights.weights):
            if ray.support not in index:
                raise DimensionError(f"ray {ray.support} is not in the enumeration")
            dense[index[ray.support]] += w
        return MixtureWeights(dense)


def random_weights(n_rays: int, seed: int) -> MixtureWeights:
    """Uniform-Dirichlet weights over n_rays rays"""
    rng = np.random.default_rng(seed)
    return MixtureWeights(rng.dirichlet(np.ones(n_rays)))


def rays_to_dict(d: int, p: float, rays: Sequence[RayDensity]) -> Dict[str, Any]:
    """Ray set in the {d, p, rays: [{support, mass}]} exchange format"""
    return {'d': d, 'p': p, 'rays': [ray.to_dict() for ray in rays]}
