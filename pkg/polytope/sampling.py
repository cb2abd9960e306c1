# polytope/sampling.py
"""
Sampling exchangeable binary vectors and sum pmfs.

Ray mixtures are sampled in three steps (ray, then one of its two support
points, then a uniformly placed vector of that weight), which needs O(d)
memory per draw and nothing of size 2^d. The one-factor and beta-mixture
models are the usual positive-correlation comparison families. Uniform
sampling over the polytope picks a simplex of the triangulation by volume and
flat Dirichlet weights inside it.

Every sampler works in seeded blocks (utils.streams), so a given seed yields
the same batch for any worker count, and the Full and SumOnly modes share the
stream that decides the row sums.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Any, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from polytope.errors import DimensionError, DomainError
from polytope.geometry import MeasureCdf, class_vertices, embed, triangulate
from polytope.measures import (
    MeasureSpec,
    correlation_bounds,
    correlation_of,
    mu2_of_rho,
)
from polytope.rays import (
    MixtureWeights,
    RayDensity,
    RayMixture,
    SumPmf,
    enumerate_rays,
    frechet_upper_ray,
    min_mu2_ray,
)
from utils.streams import CHOICE_STREAM, PLACEMENT_STREAM, block_rng, blocks, check_seed, parallel_map

logger = logging.getLogger(__name__)


class SampleMode(str, Enum):
    FULL = 'full'
    SUM_ONLY = 'sum-only'


class FamilyKind(str, Enum):
    RAY_MIXTURE = 'ray-mixture'
    CORRELATION_FAMILY = 'correlation-family'
    ONE_FACTOR = 'one-factor'
    BETA_MIXTURE = 'beta'


@dataclass(frozen=True)
class SampleBatch:
    """n draws of a d-dimensional binary vector: rows (Full) or their sums (SumOnly)"""
    d: int
    n: int
    mode: SampleMode
    seed: int
    sums: np.ndarray
    rows: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.sums.shape != (self.n,):
            raise DimensionError(f"expected {self.n} sums, got shape {self.sums.shape}")
        if self.mode == SampleMode.FULL:
            if self.rows is None or self.rows.shape != (self.n, self.d):
                raise DimensionError(f"Full batch needs an {self.n}x{self.d} matrix")

    def counts(self) -> List[Tuple[int, int]]:
        """(y, count) pairs, increasing in y"""
        values, counts = np.unique(self.sums, return_counts=True)
        return [(int(y), int(c)) for y, c in zip(values, counts)]


@dataclass(frozen=True)
class FamilySpec:
    """Which generator to sample from, with its parameters"""
    kind: FamilyKind
    mixture: Optional[RayMixture] = None
    rho: Optional[float] = None
    a: Optional[float] = None
    b: Optional[float] = None

    def __post_init__(self):
        kind = FamilyKind(self.kind)
        object.__setattr__(self, 'kind', kind)
        if kind == FamilyKind.RAY_MIXTURE and self.mixture is None:
            raise DomainError("ray-mixture family needs a mixture")
        if kind in (FamilyKind.CORRELATION_FAMILY, FamilyKind.ONE_FACTOR) and self.rho is None:
            raise DomainError(f"{kind.value} family needs a target correlation")
        if kind == FamilyKind.ONE_FACTOR and not 0.0 <= self.rho <= 1.0:
            raise DomainError(f"one-factor model needs 0 <= rho <= 1, got {self.rho}")
        if kind == FamilyKind.BETA_MIXTURE:
            if self.rho is None and (self.a is None or self.b is None):
                raise DomainError("beta family needs (a, b) or a target correlation")
            if self.rho is not None and self.rho <= 0:
                raise DomainError(f"beta mixture needs rho > 0, got {self.rho}")


def sample_counts(batch: SampleBatch) -> List[Tuple[int, int]]:
    """(y, count) pairs of a batch"""
    return batch.counts()


def _sample_blocks(n: int, seed: int, draw) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    if n < 0:
        raise DomainError(f"draw count must be nonnegative, got {n}")
    check_seed(seed)
    parts = parallel_map(lambda block: draw(*block), blocks(n))
    if not parts:
        return np.zeros(0, dtype=np.int64), None
    sums = np.concatenate([part[0] for part in parts]).astype(np.int64)
    rows = None
    if parts[0][1] is not None:
        rows = np.concatenate([part[1] for part in parts])
    return sums, rows


def _place_ones(rng: np.random.Generator, d: int, sums: np.ndarray) -> np.ndarray:
    """Rows with sums[i] ones at uniformly chosen positions"""
    rows = np.zeros((sums.shape[0], d), dtype=np.uint8)
    for i, k in enumerate(sums):
        if k:
            rows[i, rng.choice(d, size=int(k), replace=False)] = 1
    return rows


def _batch(d: int, n: int, seed: int, sum_only: bool, sums, rows) -> SampleBatch:
    mode = SampleMode.SUM_ONLY if sum_only else SampleMode.FULL
    if n == 0 and not sum_only:
        rows = np.zeros((0, d), dtype=np.uint8)
    return SampleBatch(d, n, mode, seed, sums, rows)


def sample_ray_mixture(mixture: RayMixture, n: int, seed: int, sum_only: bool = False) -> SampleBatch:
    """Draw n vectors from sum_j lambda_j r_j"""
    d = mixture.d
    weights = mixture.weights.weights
    low = np.array([ray.j1 for ray in mixture.rays])
    high = np.array([ray.j2 for ray in mixture.rays])
    upper_mass = np.array([0.0 if ray.is_point_mass else ray.mass[1] for ray in mixture.rays])

    def draw(block: int, start: int, stop: int):
        rng = block_rng(seed, block, CHOICE_STREAM)
        size = stop - start
        which = rng.choice(len(weights), size=size, p=weights)
        u = rng.random(size)
        sums = np.where(u < upper_mass[which], high[which], low[which])
        if sum_only:
            return sums, None
        return sums, _place_ones(block_rng(seed, block, PLACEMENT_STREAM), d, sums)

    sums, rows = _sample_blocks(n, seed, draw)
    logger.info(f"Sampled {n} draws from a {len(weights)}-ray mixture (d={d}, sum_only={sum_only})")
    return _batch(d, n, seed, sum_only, sums, rows)


def sample_mixture(d: int, p: float, weights: MixtureWeights, n: int, seed: int,
                   sum_only: bool = False, rays: Optional[Sequence[RayDensity]] = None) -> SampleBatch:
    """Sampler for lambda given over enumerate_rays(d, p)"""
    rays = list(rays) if rays is not None else enumerate_rays(d, p)
    if len(weights) != len(rays):
        raise DimensionError(f"{len(weights)} weights for {len(rays)} rays of S_{d}({p})")
    return sample_ray_mixture(RayMixture(tuple(rays), weights), n, seed, sum_only)


def correlation_family(d: int, p: float, rho: float) -> RayMixture:
    """
    lambda r_min + (1 - lambda) r_max with correlation exactly rho, r_min being
    the ray of smallest mu_2 and r_max the {0, d} ray.
    """
    rho_min, rho_max = correlation_bounds(d, p)
    if not rho_min - 1e-12 <= rho <= rho_max + 1e-12:
        raise DomainError(f"rho={rho} outside the attainable range [{rho_min}, {rho_max}] for d={d}, p={p}")
    low_ray = min_mu2_ray(d, p)
    high_ray = frechet_upper_ray(d, p)
    rho_m = correlation_of(low_ray.pmf())
    rho_M = correlation_of(high_ray.pmf())
    lam = min(max((rho_M - rho) / (rho_M - rho_m), 0.0), 1.0)
    return RayMixture((low_ray, high_ray), MixtureWeights(np.array([lam, 1.0 - lam])))


def sample_one_factor(d: int, p: float, rho: float, n: int, seed: int, sum_only: bool = False) -> SampleBatch:
    """
    X_i = (1 - U_i) Y_i + U_i Z with U_i ~ B(sqrt(rho)), Y_i, Z ~ B(p).
    The sum is M Z + Bin(d - M, p) with M the number of U_i equal to 1.
    """
    if not 0.0 <= rho <= 1.0:
        raise DomainError(f"one-factor model needs 0 <= rho <= 1, got {rho}")
    if not 0.0 < p < 1.0:
        raise DomainError(f"mean must lie in (0, 1), got {p}")
    loading = math.sqrt(rho)

    def draw(block: int, start: int, stop: int):
        rng = block_rng(seed, block, CHOICE_STREAM)
        size = stop - start
        z = (rng.random(size) < p).astype(np.int64)
        m = rng.binomial(d, loading, size)
        k = rng.binomial(d - m, p)
        sums = m * z + k
        if sum_only:
            return sums, None
        placement = block_rng(seed, block, PLACEMENT_STREAM)
        rows = np.zeros((size, d), dtype=np.uint8)
        for i in range(size):
            chosen = placement.choice(d, size=int(m[i] + k[i]), replace=False)
            rows[i, chosen[:m[i]]] = z[i]
            rows[i, chosen[m[i]:]] = 1
        return sums, rows

    sums, rows = _sample_blocks(n, seed, draw)
    logger.info(f"Sampled {n} one-factor draws (d={d}, p={p}, rho={rho})")
    return _batch(d, n, seed, sum_only, sums, rows)


def beta_mixture_params(p: float, rho: float) -> Tuple[float, float]:
    """(a, b) with a/(a+b) = p and a(a+1)/((a+b)(a+b+1)) = rho p q + p^2"""
    if not 0.0 < p < 1.0:
        raise DomainError(f"mean must lie in (0, 1), got {p}")
    if rho <= 0:
        raise DomainError(f"beta mixture cannot represent rho={rho} (needs rho > 0)")
    if mu2_of_rho(p, rho) >= p:
        raise DomainError(f"rho={rho} gives mu_2 >= p, a degenerate beta mixture")
    # a = p (p - mu2) / (mu2 - p^2) simplifies to p (1 - rho) / rho
    scale = (1.0 - rho) / rho
    return p * scale, (1.0 - p) * scale


def beta_mixture_moments(a: float, b: float) -> Tuple[float, float, float]:
    """(p, mu_2, rho) of the beta mixture"""
    if a <= 0 or b <= 0:
        raise DomainError(f"beta parameters must be positive, got ({a}, {b})")
    p = a / (a + b)
    mu2 = a * (a + 1) / ((a + b) * (a + b + 1))
    return p, mu2, (mu2 - p * p) / (p * (1 - p))


def sample_beta_mixture(d: int, a: float, b: float, n: int, seed: int, sum_only: bool = False) -> SampleBatch:
    """Psi ~ Beta(a, b) per draw, then d conditionally i.i.d. B(Psi) coordinates"""
    if a <= 0 or b <= 0:
        raise DomainError(f"beta parameters must be positive, got ({a}, {b})")

    def draw(block: int, start: int, stop: int):
        rng = block_rng(seed, block, CHOICE_STREAM)
        psi = rng.beta(a, b, stop - start)
        sums = rng.binomial(d, psi)
        if sum_only:
            return sums, None
        return sums, _place_ones(block_rng(seed, block, PLACEMENT_STREAM), d, sums)

    sums, rows = _sample_blocks(n, seed, draw)
    logger.info(f"Sampled {n} beta-mixture draws (d={d}, a={a}, b={b})")
    return _batch(d, n, seed, sum_only, sums, rows)


def sample_family(family: FamilySpec, d: int, p: float, n: int, seed: int, sum_only: bool = False) -> SampleBatch:
    """Dispatch to the sampler of a FamilySpec"""
    if family.kind == FamilyKind.RAY_MIXTURE:
        return sample_ray_mixture(family.mixture, n, seed, sum_only)
    if family.kind == FamilyKind.CORRELATION_FAMILY:
        return sample_ray_mixture(correlation_family(d, p, family.rho), n, seed, sum_only)
    if family.kind == FamilyKind.ONE_FACTOR:
        return sample_one_factor(d, p, family.rho, n, seed, sum_only)
    if family.a is not None and family.b is not None:
        a, b = family.a, family.b
    else:
        a, b = beta_mixture_params(p, family.rho)
    return sample_beta_mixture(d, a, b, n, seed, sum_only)


def uniform_pmf_matrix(d: int, p: Optional[float], n: int, seed: int) -> np.ndarray:
    """
    n pmfs uniform on S_d(p) as rows of an n x (d+1) matrix (uniform on the
    simplex of all sum pmfs when p is None).
    """
    vertices = class_vertices(d, p)
    points = np.array([v.probs for v in vertices])
    if len(vertices) == 1:
        return np.tile(points[0], (n, 1))

    if p is None:
        simplices = (tuple(range(d + 1)),)
        probs = np.ones(1)
    else:
        tri = triangulate(embed(vertices))
        simplices, probs = tri.simplices, tri.probs
    corners = np.array([points[list(s)] for s in simplices])

    def draw(block: int, start: int, stop: int):
        rng = block_rng(seed, block, CHOICE_STREAM)
        size = stop - start
        which = rng.choice(len(simplices), size=size, p=probs)
        spacings = rng.standard_exponential((size, corners.shape[1]))
        weights = spacings / spacings.sum(axis=1, keepdims=True)
        return np.einsum('nk,nkj->nj', weights, corners[which]), None

    check_seed(seed)
    parts = parallel_map(lambda block: draw(*block)[0], blocks(n))
    if not parts:
        return np.zeros((0, d + 1))
    return np.concatenate(parts)


def sample_uniform_pmfs(d: int, p: Optional[float], n: int, seed: int) -> List[SumPmf]:
    """n pmfs drawn uniformly from S_d(p), or from S_d when p is None"""
    matrix = uniform_pmf_matrix(d, p, n, seed)
    # barycentric round-off
    matrix = matrix / matrix.sum(axis=1, keepdims=True)
    return [SumPmf(d, row) for row in matrix]


def empirical_measure_values(d: int, p: Optional[float], measure: MeasureSpec, n: int, seed: int) -> np.ndarray:
    """Measure evaluated on n uniform draws"""
    return np.array([measure.evaluate(pmf) for pmf in sample_uniform_pmfs(d, p, n, seed)])


def empirical_measure_distribution(d: int, p: Optional[float], measure: MeasureSpec, n: int, seed: int,
                                   grid: Optional[Sequence[float]] = None) -> MeasureCdf:
    """Empirical CDF of the measure over uniform draws from the polytope"""
    if n < 1:
        raise DomainError(f"need at least one draw, got {n}")
    values = np.sort(empirical_measure_values(d, p, measure, n, seed))
    grid = np.unique(values) if grid is None else np.asarray(grid, dtype=float)
    cdf = np.searchsorted(values, grid, side='right') / n
    logger.info(f"Empirical {measure.label} distribution from {n} uniform draws (d={d}, p={p})")
    return MeasureCdf(grid, cdf, measure.label)


def joint_mean_correlation(d: int, n: int, seed: int) -> np.ndarray:
    """(p, rho) of n uniform draws from E_d, as an n x 2 matrix"""
    if d < 2:
        raise DomainError("correlation needs d >= 2")
    out = []
    for pmf in sample_uniform_pmfs(d, None, n, seed):
        p = pmf.mean() / d
        if 0.0 < p < 1.0:
            out.append((p, correlation_of(pmf)))
    return np.array(out).reshape(-1, 2)


def one_factor_pmf(d: int, p: float, rho: float) -> SumPmf:
    """Exact sum pmf of the one-factor model"""
    if not 0.0 <= rho <= 1.0:
        raise DomainError(f"one-factor model needs 0 <= rho <= 1, got {rho}")
    y = np.arange(d + 1)
    probs = np.zeros(d + 1)
    for m, weight in enumerate(stats.binom.pmf(np.arange(d + 1), d, math.sqrt(rho))):
        if weight == 0.0:
            continue
        free = stats.binom.pmf(y, d - m, p)
        shifted = stats.binom.pmf(y - m, d - m, p)
        probs += weight * ((1.0 - p) * free + p * shifted)
    return SumPmf(d, probs / probs.sum())


def beta_mixture_pmf(d: int, a: float, b: float) -> SumPmf:
    """Beta-binomial sum pmf"""
    probs = stats.betabinom.pmf(np.arange(d + 1), d, a, b)
    return SumPmf(d, probs / probs.sum())


def family_curves(d: int, p: float, steps: int = 21) -> Dict[str, Any]:
    """
    Sum pmfs of the correlation family, the one-factor model (rho >= 0) and the
    beta mixture (rho > 0) along a grid of correlations.
    """
    if steps < 2:
        raise DomainError(f"need at least two steps, got {steps}")
    rho_min, rho_max = correlation_bounds(d, p)
    curves: Dict[str, Any] = {'d': d, 'p': p, 'rho_min': rho_min, 'rho_max': rho_max,
                              'ray_family': [], 'one_factor': [], 'beta_mixture': []}
    for rho in np.linspace(rho_min, rho_max, steps):
        rho = float(rho)
        curves['ray_family'].append({'rho': rho, 'pmf': correlation_family(d, p, rho).pmf().to_list()})
        if rho >= 0.0:
            curves['one_factor'].append({'rho': rho, 'pmf': one_factor_pmf(d, p, rho).to_list()})
        if 0.0 < rho < 1.0:
            a, b = beta_mixture_params(p, rho)
            curves['beta_mixture'].append({'rho': rho, 'a': a, 'b': b, 'pmf': beta_mixture_pmf(d, a, b).to_list()})
    return curves
