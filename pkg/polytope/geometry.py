# polytope/geometry.py
"""
Triangulation of the polytope C = {p >= 0, sum p = 1, sum j p_j = pd} (or of
the simplex of all sum pmfs), simplex volumes in the affine hull, Varsi
volume fractions and the exact distribution of expectation measures.

For a measure that is affine in the pmf, the region of a simplex T_i where the
measure is <= t is a frustum of T_i, and in barycentric coordinates its volume
fraction is the fraction of the standard simplex where sum lambda_j v_j <= t,
v_j being the measure at the vertices. Mixing the fractions with the
probabilities vol(T_i)/vol(C) gives the CDF over the whole polytope.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Any, List, Optional, Sequence, Tuple

import numpy as np

from polytope.errors import DimensionError, DomainError, InvariantError
from polytope.measures import MeasureKind, MeasureSpec
from polytope.rays import SumPmf, enumerate_rays
from utils.streams import parallel_map

logger = logging.getLogger(__name__)

AFFINE_TOL = 1e-10
PRUNE_TOL = 1e-12
VARSI_EPS = 1e-12


@dataclass(frozen=True)
class EmbeddedPolytope:
    """Vertices and their coordinates in an orthonormal basis of the affine hull"""
    vertices: Tuple[SumPmf, ...]
    origin: np.ndarray
    basis: np.ndarray
    coords: np.ndarray

    @property
    def affine_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def points(self) -> np.ndarray:
        return np.array([v.probs for v in self.vertices])

    def lift(self, coords: np.ndarray) -> np.ndarray:
        """Back from hull coordinates to pmf vectors"""
        return self.origin + np.asarray(coords) @ self.basis


@dataclass(frozen=True)
class TriangulatedPolytope:
    """Simplices as vertex-index tuples, with volumes and selection probabilities"""
    polytope: EmbeddedPolytope
    simplices: Tuple[Tuple[int, ...], ...]
    volumes: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        if len(self.simplices) != len(self.volumes) or len(self.volumes) != len(self.probs):
            raise DimensionError("simplices, volumes and probs differ in length")
        if abs(float(np.sum(self.probs)) - 1.0) > 1e-12:
            raise InvariantError(f"simplex probabilities sum to {np.sum(self.probs)}")

    @property
    def volume(self) -> float:
        return float(np.sum(self.volumes))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'affine_dim': self.polytope.affine_dim,
            'simplices': [list(s) for s in self.simplices],
            'volumes': [float(v) for v in self.volumes],
            'probs': [float(p) for p in self.probs],
        }


@dataclass(frozen=True)
class MeasureCdf:
    """F(t) = P(measure <= t) on a grid of thresholds"""
    grid: np.ndarray
    values: np.ndarray
    measure_name: str

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.shape != values.shape:
            raise DimensionError("grid and values differ in shape")
        if np.any(np.diff(values) < -1e-12) or np.any(values < -1e-12) or np.any(values > 1 + 1e-12):
            raise InvariantError(f"{self.measure_name} CDF is not a nondecreasing function into [0, 1]")
        object.__setattr__(self, 'grid', grid)
        object.__setattr__(self, 'values', np.clip(values, 0.0, 1.0))

    def rows(self) -> List[Tuple[float, float]]:
        return [(float(t), float(v)) for t, v in zip(self.grid, self.values)]


@dataclass(frozen=True)
class MeasureDensity:
    """Finite-difference density (F(t + delta) - F(t)) / delta"""
    grid: np.ndarray
    values: np.ndarray
    delta: float


def _gram_schmidt(diffs: np.ndarray, tol: float) -> np.ndarray:
    basis: List[np.ndarray] = []
    for v in diffs:
        w = v.copy()
        # two passes keep the basis orthogonal to machine precision
        for _ in range(2):
            for b in basis:
                w -= (w @ b) * b
        norm = np.linalg.norm(w)
        if norm > tol:
            basis.append(w / norm)
    return np.array(basis).reshape(len(basis), diffs.shape[1])


def embed(vertices: Sequence[SumPmf], method: str = 'gram-schmidt') -> EmbeddedPolytope:
    """
    Express the vertices in an orthonormal basis of their affine hull.

    'gram-schmidt' orthonormalizes v_1 - v_0, v_2 - v_0, ... in order and uses
    v_0 as origin; 'pca' uses the principal axes around the centroid. Both are
    isometries, so volumes and volume ratios agree.
    """
    vertices = tuple(vertices)
    if len(vertices) < 2:
        raise DomainError("need at least two vertices to embed")
    d = vertices[0].d
    if any(v.d != d for v in vertices):
        raise DimensionError("vertices of different dimension")

    points = np.array([v.probs for v in vertices])
    scale = max(float(np.max(np.linalg.norm(points - points[0], axis=1))), 0.0)
    if scale == 0.0:
        raise DomainError("degenerate polytope: all vertices coincide")

    if method == 'gram-schmidt':
        origin = points[0]
        basis = _gram_schmidt(points[1:] - origin, AFFINE_TOL * scale)
    elif method == 'pca':
        origin = points.mean(axis=0)
        _, singular, vt = np.linalg.svd(points - origin, full_matrices=False)
        rank = int(np.sum(singular > AFFINE_TOL * singular[0]))
        basis = vt[:rank]
    else:
        raise DomainError(f"unknown embedding method {method!r}")

    coords = (points - origin) @ basis.T
    logger.debug(f"Embedded {len(vertices)} vertices into dimension {basis.shape[0]}")
    return EmbeddedPolytope(vertices, origin, basis, coords)


def simplex_volume(coords: np.ndarray) -> float:
    """|det(v_1 - v_0, ..., v_n - v_0)| / n! for n+1 points in n-space"""
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 2 or coords.shape[0] != coords.shape[1] + 1:
        raise DimensionError(f"a simplex in {coords.shape[-1]}-space needs {coords.shape[-1] + 1} points, got shape {coords.shape}")
    n = coords.shape[1]
    return abs(float(np.linalg.det(coords[1:] - coords[0]))) / math.factorial(n)


def _facet_plane(coords: np.ndarray, facet: Tuple[int, ...], opposite: int) -> Tuple[np.ndarray, float, float]:
    """Unit normal, offset and the sign of the side the opposite vertex lies on"""
    n = coords.shape[1]
    if n == 1:
        normal = np.ones(1)
    else:
        diffs = coords[list(facet[1:])] - coords[facet[0]]
        _, _, vt = np.linalg.svd(diffs, full_matrices=True)
        normal = vt[-1]
    offset = float(normal @ coords[facet[0]])
    side = float(normal @ coords[opposite]) - offset
    return normal, offset, math.copysign(1.0, side)


def _affine_rank(coords: np.ndarray, tol: float) -> int:
    if len(coords) < 2:
        return 0
    return int(np.linalg.matrix_rank(coords[1:] - coords[0], tol=tol))


def placing_triangulation(coords: np.ndarray) -> List[Tuple[int, ...]]:
    """
    Placing (incremental) triangulation of the convex hull of `coords`.

    Starts from the first affinely independent vertices in index order, then
    places the remaining vertices one at a time, coning each boundary facet
    the new vertex sees strictly from outside.
    """
    coords = np.asarray(coords, dtype=float)
    m, n = coords.shape
    extent = float(np.max(np.linalg.norm(coords - coords[0], axis=1)))
    eps = AFFINE_TOL * max(extent, 1e-300)

    chosen = [0]
    for i in range(1, m):
        if len(chosen) == n + 1:
            break
        if _affine_rank(coords[chosen + [i]], eps) == len(chosen):
            chosen.append(i)
    if len(chosen) != n + 1:
        raise DomainError(f"vertices span dimension {len(chosen) - 1}, expected {n}")

    first = tuple(sorted(chosen))
    simplices = [first]
    boundary: Dict[Tuple[int, ...], Tuple[np.ndarray, float, float]] = {}
    for v in first:
        facet = tuple(x for x in first if x != v)
        boundary[facet] = _facet_plane(coords, facet, v)

    for q in range(m):
        if q in chosen:
            continue
        point = coords[q]
        visible = [f for f, (normal, offset, side) in boundary.items()
                   if side * (normal @ point - offset) < -eps]
        if not visible:
            logger.debug(f"Vertex {q} lies inside the current hull, skipped")
            continue

        ridges: Dict[Tuple[int, ...], int] = {}
        for facet in visible:
            simplices.append(tuple(sorted(facet + (q,))))
            del boundary[facet]
            for v in facet:
                new_facet = tuple(sorted([x for x in facet if x != v] + [q]))
                # a ridge shared by two visible facets ends up inside
                if new_facet in ridges:
                    del ridges[new_facet]
                else:
                    ridges[new_facet] = v
        for new_facet, opposite in ridges.items():
            boundary[new_facet] = _facet_plane(coords, new_facet, opposite)

    return simplices


def triangulate(poly: EmbeddedPolytope) -> TriangulatedPolytope:
    """Triangulate the polytope; probs_i = vol(T_i) / vol(C)"""
    simplices = placing_triangulation(poly.coords)
    volumes = np.array([simplex_volume(poly.coords[list(s)]) for s in simplices])
    total = float(volumes.sum())
    if total <= 0.0:
        raise DomainError("polytope has zero volume in its affine hull")

    keep = volumes > PRUNE_TOL * total
    if not np.all(keep):
        logger.warning(f"Pruned {int(np.sum(~keep))} near-zero-volume simplices")
    simplices = tuple(s for s, k in zip(simplices, keep) if k)
    volumes = volumes[keep]
    probs = volumes / volumes.sum()

    logger.info(f"Triangulated {len(poly.vertices)} vertices (dimension {poly.affine_dim}) into {len(simplices)} simplices")
    return TriangulatedPolytope(poly, simplices, volumes, probs)


def polytope_volume(tri: TriangulatedPolytope) -> float:
    return tri.volume


def class_vertices(d: int, p: Optional[float] = None) -> List[SumPmf]:
    """Ray pmfs of S_d(p), or the unit vectors of the simplex S_d when p is None"""
    if p is None:
        return [SumPmf(d, np.eye(d + 1)[j]) for j in range(d + 1)]
    return [ray.pmf() for ray in enumerate_rays(d, p)]


def triangulate_class(d: int, p: Optional[float] = None) -> TriangulatedPolytope:
    """Embed and triangulate S_d(p) (or S_d)"""
    return triangulate(embed(class_vertices(d, p)))


def _varsi(shifted: np.ndarray) -> float:
    negative = shifted[shifted < 0]
    positive = shifted[shifted >= 0]
    if positive.size == 0:
        return 1.0
    if negative.size == 0:
        return 0.0
    A = np.zeros(positive.size + 1)
    A[0] = 1.0
    for a_k in negative:
        for j in range(1, positive.size + 1):
            a_j = positive[j - 1]
            # convex combination: both weights are positive
            A[j] = (a_j * A[j] - a_k * A[j - 1]) / (a_j - a_k)
    return float(A[-1])


def varsi_fraction(coeffs: Sequence[float], t: float) -> float:
    """
    Fraction of the standard simplex {lambda >= 0, sum lambda = 1} where
    sum lambda_j coeffs_j <= t, by Varsi's recurrence on coeffs - t.
    """
    c = np.asarray(coeffs, dtype=float).reshape(-1)
    if c.size == 0:
        raise DimensionError("varsi_fraction needs at least one coefficient")
    if t < c.min():
        return 0.0
    if t >= c.max():
        return 1.0
    shifted = c - t
    near = np.abs(shifted) < VARSI_EPS
    if np.any(near):
        up = _varsi(np.where(near, VARSI_EPS, shifted))
        down = _varsi(np.where(near, -VARSI_EPS, shifted))
        return float(np.clip(0.5 * (up + down), 0.0, 1.0))
    return float(np.clip(_varsi(shifted), 0.0, 1.0))


def measure_cdf(tri: TriangulatedPolytope, ray_vals: Sequence[float], grid: Sequence[float],
                measure_name: str = 'measure') -> MeasureCdf:
    """F(t) = sum_i P(T_i) * varsi_fraction(values on T_i, t)"""
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise DomainError("threshold grid must be sorted")
    values = np.asarray(ray_vals, dtype=float)
    if values.shape[0] != len(tri.polytope.vertices):
        raise DimensionError(f"{values.shape[0]} vertex values for {len(tri.polytope.vertices)} vertices")

    def conditional(simplex: Tuple[int, ...]) -> np.ndarray:
        local = values[list(simplex)]
        return np.array([varsi_fraction(local, t) for t in grid])

    # summed in simplex order whatever the worker count
    parts = parallel_map(conditional, tri.simplices)
    cdf = np.zeros(grid.shape[0])
    for prob, part in zip(tri.probs, parts):
        cdf += prob * part
    cdf = np.maximum.accumulate(np.clip(cdf, 0.0, 1.0))
    return MeasureCdf(grid, cdf, measure_name)


def default_grid(lo: float, hi: float, n: int) -> np.ndarray:
    if n < 2:
        raise DomainError(f"grid needs at least 2 points, got {n}")
    if hi <= lo:
        return np.array([lo, lo])
    return np.linspace(lo, hi, n)


def exact_measure_cdf(d: int, p: Optional[float], measure: MeasureSpec,
                      grid: Optional[Sequence[float]] = None, n_grid: int = 1001) -> MeasureCdf:
    """
    Exact CDF of an expectation measure over S_d(p) (or S_d when p is None).
    The entropic risk goes through E[exp(-gamma Y)], which it increases with.
    """
    if not measure.is_expectation:
        raise DomainError(f"{measure.label} is not an expectation measure, sample it instead")
    if p is None and measure.kind == MeasureKind.CORRELATION:
        raise DomainError("correlation is not affine over S_d with a free mean")

    vertices = class_vertices(d, p)
    linear = np.array([measure.linear_value(v) for v in vertices])
    actual = np.array([measure.evaluate(v) for v in vertices])
    if grid is None:
        grid = default_grid(float(actual.min()), float(actual.max()), n_grid)
    grid = np.asarray(grid, dtype=float)

    if measure.kind == MeasureKind.ENTROPIC_RISK:
        thresholds = np.exp(measure.param * grid)
    else:
        thresholds = grid

    if len(vertices) == 1 or np.allclose(linear, linear[0], rtol=0.0, atol=1e-15):
        # zero-dimensional case: the measure is constant on the class
        values = (thresholds >= linear[0]).astype(float)
        return MeasureCdf(grid, values, measure.label)

    tri = triangulate(embed(vertices))
    cdf = measure_cdf(tri, linear, thresholds, measure.label)
    return MeasureCdf(grid, cdf.values, measure.label)


def cdf_to_pdf(cdf: MeasureCdf, delta: Optional[float] = None) -> MeasureDensity:
    """
    (F(t + delta) - F(t)) / delta at the grid points with t + delta inside the
    grid; F between grid points is interpolated linearly.
    Default delta = (max - min) / 10000.
    """
    grid, values = cdf.grid, cdf.values
    span = float(grid[-1] - grid[0])
    if delta is None:
        delta = span / 10000.0
    if delta <= 0:
        raise DomainError(f"delta must be positive, got {delta}")
    keep = grid + delta <= grid[-1] + 1e-12 * max(1.0, abs(span))
    t = grid[keep]
    shifted = np.interp(t + delta, grid, values)
    density = (shifted - values[keep]) / delta
    return MeasureDensity(t, density, float(delta))


def simplex_fraction_mc(vertices: np.ndarray, evaluate: Callable[[SumPmf], float], t: float,
                        n: int, seed: int) -> float:
    """
    Relative-frequency estimate of vol({x in T : evaluate(x) <= t}) / vol(T)
    for a simplex T given by its vertex pmf vectors.
    """
    vertices = np.asarray(vertices, dtype=float)
    if n < 1:
        raise DomainError(f"need at least one draw, got {n}")
    rng = np.random.default_rng(seed)
    weights = rng.dirichlet(np.ones(vertices.shape[0]), size=n)
    d = vertices.shape[1] - 1
    points = weights @ vertices
    hits = sum(1 for row in points if evaluate(SumPmf(d, row / row.sum())) <= t)
    return hits / n
