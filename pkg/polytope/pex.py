# polytope/pex.py
"""
Partial exchangeability: invariance under the permutations that keep each
group of a fixed partition G_1, ..., G_n of the coordinates in place.

Such a pmf is determined by g(j_1, ..., j_n), the common mass of the vectors
with j_k ones inside group k. The map F_G turns it into the joint pmf of the
group sums, p_D(j) = prod_k C(d_k, j_k) g(j), a point of a simplex with
(d_1+1)...(d_n+1) vertices. Fixing the group means adds one linear equation
per group, so the extremal points are supported on at most n+1 cells and can
be listed by solving the system on every small support.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, Any, List, Sequence, Tuple

import numpy as np

from config.settings import Config
from polytope.errors import DimensionError, DomainError, InvariantError, SizeGuardError
from polytope.rays import SumPmf, binomials
from utils.streams import parallel_map

logger = logging.getLogger(__name__)

SUM_TOL = 1e-12
SOLVE_TOL = 1e-10
DEDUP_DECIMALS = 10


@dataclass(frozen=True)
class PartitionSpec:
    """Ordered partition of the coordinates 1..d into non-empty groups"""
    d: int
    groups: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in group) for group in self.groups)
        object.__setattr__(self, 'groups', groups)
        if self.d < 1:
            raise DomainError(f"dimension must be positive, got {self.d}")
        if any(len(group) == 0 for group in groups):
            raise InvariantError("groups must be non-empty")
        members = [i for group in groups for i in group]
        if sorted(members) != list(range(1, self.d + 1)):
            raise InvariantError(f"groups {groups} do not partition 1..{self.d}")

    @property
    def sizes(self) -> Tuple[int, ...]:
        return tuple(len(group) for group in self.groups)

    @property
    def n(self) -> int:
        return len(self.groups)

    @property
    def grid_shape(self) -> Tuple[int, ...]:
        return tuple(size + 1 for size in self.sizes)

    @classmethod
    def parse(cls, d: int, text: str) -> 'PartitionSpec':
        """'1,2|3,4' -> {{1,2},{3,4}}"""
        try:
            groups = tuple(tuple(int(i) for i in part.split(',') if i.strip()) for part in text.split('|'))
        except ValueError:
            raise DomainError(f"bad group list {text!r}, expected e.g. '1,2|3,4'")
        return cls(d, groups)

    @classmethod
    def trivial(cls, d: int) -> 'PartitionSpec':
        return cls(d, (tuple(range(1, d + 1)),))


def cell_label(cell: Sequence[int]) -> str:
    """'ab' for the cell (Y_1 = a, Y_2 = b); comma separated once a count has two digits"""
    if all(j < 10 for j in cell):
        return ''.join(str(j) for j in cell)
    return ','.join(str(j) for j in cell)


@dataclass(frozen=True)
class MultiSumPmf:
    """Joint pmf p_D(j_1, ..., j_n) of the group sums"""
    sizes: Tuple[int, ...]
    probs: np.ndarray

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, 'sizes', sizes)
        arr = np.array(self.probs, dtype=float)
        shape = tuple(s + 1 for s in sizes)
        if arr.shape != shape:
            raise DimensionError(f"pmf of shape {arr.shape} for grid {shape}")
        arr[(arr < 0) & (arr > -1e-14)] = 0.0
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise InvariantError("pmf entries must be finite and nonnegative")
        if abs(arr.sum() - 1.0) > SUM_TOL * max(1, arr.size):
            raise InvariantError(f"pmf sums to {arr.sum()}, expected 1")
        arr.setflags(write=False)
        object.__setattr__(self, 'probs', arr)

    def support(self) -> List[Tuple[int, ...]]:
        return [tuple(int(j) for j in cell) for cell in np.argwhere(self.probs > 0)]

    def masses(self) -> List[float]:
        return [float(self.probs[cell]) for cell in self.support()]

    def mean_vector(self) -> np.ndarray:
        """(E[Y_1], ..., E[Y_n])"""
        return np.array([group_margin(self, k).mean() for k in range(len(self.sizes))])

    def flatten(self) -> np.ndarray:
        return self.probs.reshape(-1)

    def to_dict(self) -> Dict[str, Any]:
        return {'support': [list(cell) for cell in self.support()], 'mass': self.masses()}


def _binomial_grid(sizes: Sequence[int]) -> np.ndarray:
    grid = np.ones(())
    for size in sizes:
        grid = np.multiply.outer(grid, binomials(size))
    return grid


def map_FG(g, spec: PartitionSpec) -> MultiSumPmf:
    """p_D(j) = prod_k C(d_k, j_k) g(j)"""
    g = np.asarray(g, dtype=float)
    if g.shape != spec.grid_shape:
        raise DimensionError(f"g of shape {g.shape} for grid {spec.grid_shape}")
    if np.any(g < 0):
        raise InvariantError("g must be nonnegative")
    return MultiSumPmf(spec.sizes, g * _binomial_grid(spec.sizes))


def map_FG_inv(pD: MultiSumPmf) -> np.ndarray:
    """g(j) = p_D(j) / prod_k C(d_k, j_k)"""
    return pD.probs / _binomial_grid(pD.sizes)


def pex_simplex_dimension(spec: PartitionSpec) -> int:
    """(d_1 + 1) ... (d_n + 1) - 1"""
    return math.prod(spec.grid_shape) - 1


def group_margin(pD: MultiSumPmf, k: int) -> SumPmf:
    """pmf of Y_k, the number of ones in group k"""
    if not 0 <= k < len(pD.sizes):
        raise DomainError(f"group index {k} outside 0..{len(pD.sizes) - 1}")
    others = tuple(axis for axis in range(len(pD.sizes)) if axis != k)
    margin = pD.probs.sum(axis=others) if others else pD.probs
    return SumPmf(pD.sizes[k], margin / margin.sum())


@dataclass(frozen=True)
class PexSystem:
    """
    Equality constraints over the flattened cells: the first row is the
    normalization, row k the mean equation sum (j_k - p_k d_k) p_D(j) = 0.
    """
    spec: PartitionSpec
    means: Tuple[float, ...]
    cells: Tuple[Tuple[int, ...], ...]
    matrix: np.ndarray
    rhs: np.ndarray

    def residual(self, pD: MultiSumPmf) -> np.ndarray:
        return self.matrix @ pD.flatten() - self.rhs


def pex_constraints(spec: PartitionSpec, means: Sequence[float]) -> PexSystem:
    """Normalization plus one mean equation per group, over the cells in C order"""
    means = tuple(float(p) for p in means)
    if len(means) != spec.n:
        raise DimensionError(f"{len(means)} means for {spec.n} groups")
    for p in means:
        if not 0.0 < p < 1.0:
            raise DomainError(f"group means must lie in (0, 1), got {p}")
    cells = tuple(itertools.product(*(range(size + 1) for size in spec.sizes)))
    grid = np.array(cells, dtype=float)
    offsets = grid - np.array([p * size for p, size in zip(means, spec.sizes)])
    matrix = np.vstack([np.ones(len(cells)), offsets.T])
    rhs = np.zeros(spec.n + 1)
    rhs[0] = 1.0
    return PexSystem(spec, means, cells, matrix, rhs)


def _candidate_count(cells: int, max_support: int) -> int:
    return sum(math.comb(cells, k) for k in range(1, max_support + 1))


def _solve_support(system: PexSystem, support: Tuple[int, ...]):
    """Positive basic solution on this support, or None"""
    A = system.matrix[:, support]
    if np.linalg.matrix_rank(A, tol=SOLVE_TOL) < len(support):
        return None
    x, *_ = np.linalg.lstsq(A, system.rhs, rcond=None)
    if np.linalg.norm(A @ x - system.rhs) > SOLVE_TOL:
        return None
    if np.any(x <= SOLVE_TOL):
        return None
    return x


def pex_rays(spec: PartitionSpec, means: Sequence[float]) -> List[MultiSumPmf]:
    """Extremal points of E_d(G)(p) as joint pmfs of the group sums"""
    system = pex_constraints(spec, means)
    n_cells = len(system.cells)
    max_support = spec.n + 1
    candidates = _candidate_count(n_cells, max_support)
    if candidates > Config.PEX_SUPPORT_LIMIT:
        raise SizeGuardError(f"{candidates} candidate supports over {n_cells} cells exceed the limit "
                             f"{Config.PEX_SUPPORT_LIMIT} (EXCHPOLY_PEX_SUPPORT_LIMIT)")

    def solve_from(first: int):
        found = []
        rest = range(first + 1, n_cells)
        for size in range(0, max_support):
            for tail in itertools.combinations(rest, size):
                support = (first,) + tail
                x = _solve_support(system, support)
                if x is not None:
                    found.append((support, x))
        return found

    seen = set()
    rays: List[MultiSumPmf] = []
    for found in parallel_map(solve_from, range(n_cells)):
        for support, x in found:
            x = x / x.sum()
            key = (support, tuple(np.round(x, DEDUP_DECIMALS)))
            if key in seen:
                continue
            seen.add(key)
            flat = np.zeros(n_cells)
            flat[list(support)] = x
            rays.append(MultiSumPmf(spec.sizes, flat.reshape(spec.grid_shape)))
    logger.info(f"Found {len(rays)} extremal points of E_{spec.d}(G) with means {system.means} "
                f"from {candidates} candidate supports")
    return rays


def pex_rays_to_dict(spec: PartitionSpec, means: Sequence[float], rays: Sequence[MultiSumPmf]) -> Dict[str, Any]:
    return {
        'd': spec.d,
        'groups': [list(group) for group in spec.groups],
        'means': list(means),
        'grid_shape': list(spec.grid_shape),
        'rays': [ray.to_dict() for ray in rays],
    }
