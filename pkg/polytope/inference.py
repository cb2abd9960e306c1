# polytope/inference.py
"""
Maximum likelihood in E_d and E_d(p), and the generalized likelihood-ratio
test of exchangeability.

Observations are binary vectors. Under exchangeability only the row sums
matter, so the likelihood of a sum pmf is sum_j N_j log p_j. The test
compares the exchangeable fit, spread evenly over the cells of each weight,
with the unrestricted multinomial fit on the observed cells.
"""
import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Any, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, stats

from polytope.errors import DimensionError, DomainError, InvariantError
from polytope.rays import (
    ExchangeablePmf,
    MixtureWeights,
    SumPmf,
    binomials,
    enumerate_rays,
    integer_mean,
    map_H,
    map_H_inv,
)

logger = logging.getLogger(__name__)

# expected cell count below which the chi-square approximation is flagged
MIN_EXPECTED_COUNT = 5.0


@dataclass(frozen=True)
class CountData:
    """Counts N_j of the row sums and, when known, the sparse cell counts"""
    d: int
    n: int
    sum_counts: np.ndarray
    cell_counts: Optional[Dict[Tuple[int, ...], int]] = field(default=None)

    def __post_init__(self):
        counts = np.array(self.sum_counts, dtype=np.int64).reshape(-1)
        if counts.shape[0] != self.d + 1:
            raise DimensionError(f"sum counts need {self.d + 1} entries for d={self.d}, got {counts.shape[0]}")
        if np.any(counts < 0):
            raise InvariantError("counts must be nonnegative")
        if int(counts.sum()) != self.n:
            raise InvariantError(f"sum counts total {int(counts.sum())}, expected n={self.n}")
        counts.setflags(write=False)
        object.__setattr__(self, 'sum_counts', counts)
        if self.cell_counts is not None:
            aggregated = np.zeros(self.d + 1, dtype=np.int64)
            for cell, count in self.cell_counts.items():
                if len(cell) != self.d:
                    raise DimensionError(f"cell {cell} has length {len(cell)}, expected {self.d}")
                aggregated[sum(cell)] += count
            if not np.array_equal(aggregated, counts):
                raise InvariantError("cell counts do not aggregate to the sum counts")

    @classmethod
    def from_matrix(cls, rows) -> 'CountData':
        return counts_from_matrix(rows)

    @classmethod
    def from_cell_counts(cls, d: int, cells: Dict[Sequence[int], int]) -> 'CountData':
        cell_counts: Dict[Tuple[int, ...], int] = {}
        for cell, count in cells.items():
            key = tuple(int(x) for x in cell)
            if any(x not in (0, 1) for x in key):
                raise InvariantError(f"cell {cell} is not a binary vector")
            if count < 0:
                raise InvariantError(f"negative count {count} for cell {cell}")
            if count:
                cell_counts[key] = cell_counts.get(key, 0) + int(count)
        sums = np.zeros(d + 1, dtype=np.int64)
        for cell, count in cell_counts.items():
            if len(cell) != d:
                raise DimensionError(f"cell {cell} has length {len(cell)}, expected {d}")
            sums[sum(cell)] += count
        return cls(d, int(sums.sum()), sums, cell_counts)

    @classmethod
    def from_sum_counts(cls, d: int, counts: Sequence[int]) -> 'CountData':
        counts = np.asarray(counts, dtype=np.int64)
        return cls(d, int(counts.sum()), counts)


@dataclass(frozen=True)
class GlrResult:
    """Outcome of the likelihood-ratio test of H0 against the unrestricted model"""
    hypothesis: str
    lambda_stat: float
    neg2log: float
    df: int
    p_value: float
    alpha: float
    critical_value: float
    loglik_h0: float
    loglik_full: float
    min_expected: float

    @property
    def reject(self) -> bool:
        return self.p_value < self.alpha

    def to_dict(self) -> Dict[str, Any]:
        return {
            'hypothesis': self.hypothesis,
            'lambda': self.lambda_stat,
            'neg2log': self.neg2log,
            'df': self.df,
            'p_value': self.p_value,
            'alpha': self.alpha,
            'critical_value': self.critical_value,
            'reject': self.reject,
            'loglik_h0': self.loglik_h0,
            'loglik_full': self.loglik_full,
            'min_expected': self.min_expected,
        }


def counts_from_matrix(rows) -> CountData:
    """Sparse cell counts and row-sum counts of an n x d binary matrix"""
    matrix = np.asarray(rows)
    if matrix.ndim != 2 or matrix.shape[0] == 0 or matrix.shape[1] == 0:
        raise DimensionError(f"need a non-empty n x d matrix, got shape {matrix.shape}")
    if not np.all((matrix == 0) | (matrix == 1)):
        raise InvariantError("observation matrix has entries other than 0 and 1")
    matrix = matrix.astype(np.uint8)
    cells, counts = np.unique(matrix, axis=0, return_counts=True)
    cell_counts = {tuple(int(x) for x in cell): int(c) for cell, c in zip(cells, counts)}
    d = matrix.shape[1]
    sums = np.bincount(matrix.sum(axis=1), minlength=d + 1)
    return CountData(d, matrix.shape[0], sums, cell_counts)


def reshape_tosses(sequence: Iterable[int], d: int) -> np.ndarray:
    """Consecutive non-overlapping blocks of d tosses as rows; a short tail is dropped"""
    tosses = np.asarray(list(sequence))
    if d < 1:
        raise DomainError(f"block length must be positive, got {d}")
    rows = tosses.shape[0] // d
    if rows == 0:
        raise DimensionError(f"{tosses.shape[0]} tosses do not fill one block of {d}")
    if tosses.shape[0] % d:
        logger.warning(f"Dropping {tosses.shape[0] % d} trailing tosses that do not fill a block of {d}")
    return tosses[:rows * d].reshape(rows, d)


def read_binary_csv(path: str, header: bool = False) -> np.ndarray:
    """One observation per row, d comma-separated 0/1 entries"""
    with open(path, newline='') as handle:
        reader = csv.reader(handle)
        if header:
            next(reader, None)
        rows: List[List[int]] = []
        for line_no, record in enumerate(reader, start=2 if header else 1):
            if not record or all(not cell.strip() for cell in record):
                continue
            try:
                values = [int(cell) for cell in record]
            except ValueError:
                raise InvariantError(f"{path}:{line_no}: non-integer entry in {record}")
            if rows and len(values) != len(rows[0]):
                raise DimensionError(f"{path}:{line_no}: expected {len(rows[0])} entries, got {len(values)}")
            rows.append(values)
    if not rows:
        raise DimensionError(f"{path} holds no observations")
    matrix = np.array(rows)
    if not np.all((matrix == 0) | (matrix == 1)):
        raise InvariantError(f"{path} has entries other than 0 and 1")
    logger.info(f"Read {matrix.shape[0]} observations of dimension {matrix.shape[1]} from {path}")
    return matrix.astype(np.uint8)


def log_likelihood(counts: CountData, pY: SumPmf) -> float:
    """sum_j N_j log p_j over the observed sums (0^0 = 1); -inf if an observed sum has no mass"""
    if pY.d != counts.d:
        raise DimensionError(f"pmf of dimension {pY.d} for counts of dimension {counts.d}")
    observed = counts.sum_counts > 0
    if np.any(pY.probs[observed] <= 0):
        return -math.inf
    return float(counts.sum_counts[observed] @ np.log(pY.probs[observed]))


def mle_unconstrained(counts: CountData) -> ExchangeablePmf:
    """f_j = (N_j / n) / C(d, j), the MLE over all of E_d"""
    if counts.n == 0:
        raise DomainError("no observations")
    fitted = map_H_inv(SumPmf(counts.d, counts.sum_counts / counts.n))
    logger.info(f"Fitted E_{counts.d} to {counts.n} observations")
    return fitted


def _fixed_mean_probs(counts: CountData, m: float) -> np.ndarray:
    """
    Maximizer of sum_j N_j log p_j subject to sum p = 1 and sum (j - m) p_j = 0.
    Stationarity gives p_j = N_j / (n + beta (j - m)) on the observed sums; the
    multiplier beta is the root of the decreasing mean residual g, kept in the
    range where every n + beta (j - m) stays nonnegative. When g has no root
    there, the missing mass sits on the extreme sum 0 or d.
    """
    d, n = counts.d, counts.n
    N = counts.sum_counts.astype(float)
    offsets = np.arange(d + 1) - m
    observed = N > 0

    def probs(beta: float) -> np.ndarray:
        out = np.zeros(d + 1)
        out[observed] = N[observed] / (n + beta * offsets[observed])
        return out

    def residual(beta: float) -> float:
        return float(offsets @ probs(beta))

    if not np.any(observed & (np.abs(offsets) > 1e-12)):
        # every observation sits at the mean itself
        return N / n

    beta_lo, beta_hi = -n / (d - m), n / m
    span = beta_hi - beta_lo
    # open ends where the extreme sum is observed: there g runs to +-inf
    lo = beta_lo + span * 1e-13 if observed[d] else beta_lo
    hi = beta_hi - span * 1e-13 if observed[0] else beta_hi
    g_lo, g_hi = residual(lo), residual(hi)

    if g_lo <= 0.0:
        out = probs(beta_lo)
        out[d] += -g_lo / (d - m)
        return out
    if g_hi >= 0.0:
        out = probs(beta_hi)
        out[0] += g_hi / m
        return out
    beta = optimize.brentq(residual, lo, hi, xtol=1e-14 * max(1.0, span), rtol=4 * np.finfo(float).eps, maxiter=500)
    out = probs(beta)
    return out / out.sum()


def ray_weights_for(pY: SumPmf, p: float) -> Tuple[MixtureWeights, float]:
    """
    One lambda with sum_j lambda_j r_j = pY over enumerate_rays(d, p), found by
    nonnegative least squares on the stacked ray and normalization equations.
    Returns the weights and the residual norm.
    """
    rays = enumerate_rays(pY.d, p)
    R = np.column_stack([ray.pmf().probs for ray in rays])
    A = np.vstack([R, np.ones((1, len(rays)))])
    b = np.concatenate([pY.probs, [1.0]])
    lam, residual = optimize.nnls(A, b)
    if residual > 1e-8:
        logger.warning(f"Ray decomposition residual {residual:.3g}: pmf may lie outside S_{pY.d}({p})")
    return MixtureWeights(lam), float(residual)


def mle_fixed_p(counts: CountData, p: float) -> Tuple[SumPmf, MixtureWeights]:
    """MLE over E_d(p) as a sum pmf, with one ray representation of it"""
    if counts.n == 0:
        raise DomainError("no observations")
    if not 0.0 < p < 1.0:
        raise DomainError(f"mean must lie in (0, 1), got {p}")
    _, m = integer_mean(counts.d, p)
    probs = _fixed_mean_probs(counts, m)
    fitted = SumPmf(counts.d, np.clip(probs, 0.0, None) / probs.sum())
    weights, _ = ray_weights_for(fitted, p)
    logger.info(f"Fitted E_{counts.d}({p}) to {counts.n} observations")
    return fitted, weights


def glr_df(d: int, fixed_mean: bool) -> int:
    """2^d - 1 - dim(H0), with dim E_d = d and dim E_d(p) = d - 1"""
    return 2**d - 1 - (d - 1 if fixed_mean else d)


def glr_test(counts: CountData, p: Optional[float] = None, alpha: float = 0.05) -> GlrResult:
    """
    Test exchangeability (p None) or exchangeability with mean p against the
    unrestricted model on {0,1}^d.
    """
    if counts.cell_counts is None:
        raise DomainError("the likelihood-ratio test needs cell counts, not only sum counts")
    if counts.n == 0:
        raise DomainError("no observations")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {alpha}")
    d, n = counts.d, counts.n

    if p is None:
        hypothesis = f"E_{d}"
        fitted = map_H(mle_unconstrained(counts))
    else:
        hypothesis = f"E_{d}({p})"
        fitted, _ = mle_fixed_p(counts, p)
    cell_probs = fitted.probs / binomials(d)

    observed = np.array(list(counts.cell_counts.values()), dtype=float)
    weights = np.array([sum(cell) for cell in counts.cell_counts])
    loglik_full = float(observed @ np.log(observed / n))
    loglik_h0 = float(observed @ np.log(cell_probs[weights]))
    neg2log = max(2.0 * (loglik_full - loglik_h0), 0.0)

    df = glr_df(d, p is not None)
    min_expected = float(n * cell_probs.min())
    if min_expected < MIN_EXPECTED_COUNT:
        logger.warning(f"Smallest expected cell count is {min_expected:.3g} (< {MIN_EXPECTED_COUNT:g}); "
                       f"the chi-square approximation may be poor")

    result = GlrResult(
        hypothesis=hypothesis,
        lambda_stat=math.exp(-neg2log / 2.0),
        neg2log=neg2log,
        df=df,
        p_value=float(stats.chi2.sf(neg2log, df)),
        alpha=alpha,
        critical_value=float(stats.chi2.isf(alpha, df)),
        loglik_h0=loglik_h0,
        loglik_full=loglik_full,
        min_expected=min_expected,
    )
    logger.info(f"GLR test of {hypothesis}: -2logL={neg2log:.4f}, df={df}, p-value={result.p_value:.4g}")
    return result
