# tests/test_sampling.py
import math
from unittest.mock import patch

import numpy as np
import pytest
from scipy.spatial import Delaunay
from scipy.stats import chisquare

from config.settings import Config
from polytope.errors import DimensionError, DomainError
from polytope.geometry import class_vertices, embed
from polytope.measures import MeasureKind, MeasureSpec, correlation_bounds, correlation_of, cross_moment
from polytope.rays import MixtureWeights, enumerate_rays, mixture_pmf, random_weights
from polytope.sampling import (
    FamilyKind,
    FamilySpec,
    SampleMode,
    beta_mixture_moments,
    beta_mixture_params,
    beta_mixture_pmf,
    correlation_family,
    empirical_measure_distribution,
    empirical_measure_values,
    family_curves,
    joint_mean_correlation,
    one_factor_pmf,
    sample_beta_mixture,
    sample_counts,
    sample_family,
    sample_mixture,
    sample_one_factor,
    sample_uniform_pmfs,
    uniform_pmf_matrix,
)


def pair_moment(rows):
    """Mean of X_1 X_2 over the rows"""
    return float(np.mean(rows[:, 0].astype(float) * rows[:, 1]))


def mu2_estimate(sums, d):
    """Pooled estimate of E[X_i X_j] from the sums, with its standard error"""
    y = np.asarray(sums, dtype=float)
    values = y * (y - 1) / (d * (d - 1))
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def is_unimodal(counts):
    """Counts rise to the peak and fall after it, up to four standard errors per step"""
    counts = np.asarray(counts, dtype=float)
    peak = int(np.argmax(counts))
    slack = 4 * np.sqrt(counts[:-1] + counts[1:] + 1)
    steps = np.diff(counts)
    rising = np.all(steps[:peak] >= -slack[:peak])
    falling = np.all(steps[peak:] <= slack[peak:])
    return bool(rising and falling)


class TestRayMixtureSampler:

    def test_unit_weight_ray_frequencies(self):
        # ray on {0, 3} of E_3(0.4): Y = 3 with probability 0.4
        batch = sample_mixture(3, 0.4, MixtureWeights.unit(4, 1), 100_000, seed=1, sum_only=True)
        assert set(np.unique(batch.sums)) <= {0, 3}
        share = float(np.mean(batch.sums == 3))
        assert abs(share - 0.4) < 4 * math.sqrt(0.24 / 100_000)

    def test_mean_of_random_mixture(self):
        batch = sample_mixture(3, 0.4, random_weights(4, seed=2), 100_000, seed=3, sum_only=True)
        assert abs(batch.sums.mean() - 1.2) < 4 * 1.5 / math.sqrt(100_000)

    def test_full_rows_match_sum_only(self):
        weights = random_weights(12, seed=4)
        full = sample_mixture(6, 0.4, weights, 5000, seed=5)
        sums = sample_mixture(6, 0.4, weights, 5000, seed=5, sum_only=True)
        assert full.mode == SampleMode.FULL and sums.mode == SampleMode.SUM_ONLY
        assert sums.rows is None
        np.testing.assert_array_equal(full.rows.sum(axis=1), full.sums)
        np.testing.assert_array_equal(full.sums, sums.sums)

    def test_same_seed_same_batch(self):
        weights = random_weights(4, seed=6)
        a = sample_mixture(3, 0.4, weights, 2000, seed=7)
        b = sample_mixture(3, 0.4, weights, 2000, seed=7)
        np.testing.assert_array_equal(a.rows, b.rows)

    def test_independent_of_thread_count(self):
        weights = random_weights(12, seed=8)
        n = 3 * Config.BLOCK_SIZE + 17
        with patch.object(Config, 'THREADS', 1):
            single = sample_mixture(6, 0.4, weights, n, seed=9)
        with patch.object(Config, 'THREADS', 4):
            pooled = sample_mixture(6, 0.4, weights, n, seed=9)
        np.testing.assert_array_equal(single.rows, pooled.rows)

    def test_rows_are_exchangeable(self):
        batch = sample_mixture(4, 0.5, MixtureWeights.unit(5, 0), 40_000, seed=10)
        column_means = batch.rows.mean(axis=0)
        assert np.max(np.abs(column_means - 0.5)) < 4 * math.sqrt(0.25 / 40_000)

    @pytest.mark.parametrize('d, p, weight_seed', [(3, 0.4, 40), (6, 0.4, 41), (5, 0.4, 42)])
    def test_sums_follow_mixture_pmf(self, d, p, weight_seed):
        rays = enumerate_rays(d, p)
        weights = random_weights(len(rays), seed=weight_seed)
        batch = sample_mixture(d, p, weights, 100_000, seed=weight_seed + 100, sum_only=True)
        probs = mixture_pmf(rays, weights).probs
        support = probs > 0
        observed = np.bincount(batch.sums, minlength=d + 1)
        assert observed[~support].sum() == 0
        expected = probs[support] / probs[support].sum() * observed.sum()
        assert chisquare(observed[support], expected).pvalue > 1e-3

    @pytest.mark.parametrize('k', [1, 2, 3])
    def test_vectors_with_equal_sum_are_uniform(self, k):
        d = 4
        batch = sample_mixture(d, 0.5, MixtureWeights.uniform(5), 60_000, seed=43)
        rows = batch.rows[batch.sums == k]
        codes = rows.astype(np.int64) @ (1 << np.arange(d))
        patterns = [c for c in range(1 << d) if bin(c).count('1') == k]
        observed = np.bincount(codes, minlength=1 << d)[patterns]
        assert observed.sum() == rows.shape[0]
        assert len(patterns) == math.comb(d, k)
        assert chisquare(observed).pvalue > 1e-3

    def test_counts(self):
        batch = sample_mixture(3, 0.4, MixtureWeights.unit(4, 1), 1000, seed=11, sum_only=True)
        counts = sample_counts(batch)
        assert [y for y, _ in counts] == [0, 3]
        assert sum(c for _, c in counts) == 1000

    def test_zero_draws(self):
        batch = sample_mixture(3, 0.4, MixtureWeights.uniform(4), 0, seed=1)
        assert batch.rows.shape == (0, 3)

    def test_weight_length_mismatch(self):
        with pytest.raises(DimensionError):
            sample_mixture(3, 0.4, MixtureWeights.uniform(3), 10, seed=1)

    def test_bad_seed(self):
        with pytest.raises(DomainError):
            sample_mixture(3, 0.4, MixtureWeights.uniform(4), 10, seed=-1)

    def test_large_dimension_sum_only(self):
        d, p = 100_000, 0.4
        rho_min, _ = correlation_bounds(d, p)
        rho = rho_min / 2
        batch = sample_family(FamilySpec(FamilyKind.CORRELATION_FAMILY, rho=rho), d, p, 10_000, seed=12,
                              sum_only=True)
        assert batch.rows is None
        assert batch.sums.shape == (10_000,)
        assert batch.sums.min() >= 0 and batch.sums.max() <= d
        se = batch.sums.std(ddof=1) / math.sqrt(batch.sums.size)
        assert abs(batch.sums.mean() - p * d) < 4.5 * se + 1e-9
        mu2, mu2_se = mu2_estimate(batch.sums, d)
        assert abs(mu2 - (p * p + rho * p * (1 - p))) < 4.5 * mu2_se + 1e-9


class TestCorrelationFamily:

    def test_endpoints(self):
        rays = enumerate_rays(3, 0.4)
        rho_min, rho_max = correlation_bounds(3, 0.4)
        top = correlation_family(3, 0.4, rho_max).dense(rays).weights
        bottom = correlation_family(3, 0.4, rho_min).dense(rays).weights
        np.testing.assert_allclose(top, [0, 1, 0, 0], atol=1e-12)
        np.testing.assert_allclose(bottom, [0, 0, 1, 0], atol=1e-12)

    @pytest.mark.parametrize('rho', [-0.2, 0.0, 0.3, 0.7])
    def test_hits_target_correlation(self, rho):
        mixture = correlation_family(3, 0.4, rho)
        assert correlation_of(mixture.pmf()) == pytest.approx(rho, abs=1e-12)

    def test_zero_correlation_mu2(self):
        assert cross_moment(correlation_family(6, 0.4, 0.0).pmf(), 2) == pytest.approx(0.16, abs=1e-12)

    def test_out_of_range(self):
        with pytest.raises(DomainError):
            correlation_family(3, 0.4, -0.5)

    def test_sampled_pair_moment(self):
        batch = sample_family(FamilySpec(FamilyKind.CORRELATION_FAMILY, rho=0.3), 3, 0.4, 100_000, seed=13)
        mu2 = 0.16 + 0.3 * 0.24
        se = math.sqrt(mu2 * (1 - mu2) / 100_000)
        assert abs(pair_moment(batch.rows) - mu2) < 4 * se

    @pytest.mark.parametrize('d, p', [(3, 0.4), (6, 0.4)])
    @pytest.mark.parametrize('t', [0.0, 0.25, 0.5, 0.75, 1.0])
    def test_sampled_mu2_across_range(self, d, p, t):
        rho_min, rho_max = correlation_bounds(d, p)
        rho = (1 - t) * rho_min + t * rho_max
        batch = sample_family(FamilySpec(FamilyKind.CORRELATION_FAMILY, rho=rho), d, p, 50_000,
                              seed=50 + int(4 * t) + d, sum_only=True)
        mu2, se = mu2_estimate(batch.sums, d)
        assert abs(mu2 - (p * p + rho * p * (1 - p))) < 4.5 * se + 1e-12


class TestOneFactor:

    def test_full_correlation_equal_coordinates(self):
        batch = sample_one_factor(5, 0.4, 1.0, 2000, seed=14)
        assert set(np.unique(batch.sums)) <= {0, 5}
        assert np.all(batch.rows.min(axis=1) == batch.rows.max(axis=1))

    def test_exact_pmf_moments(self):
        pmf = one_factor_pmf(5, 0.4, 0.25)
        assert pmf.mean() == pytest.approx(2.0, abs=1e-12)
        assert cross_moment(pmf, 2) == pytest.approx(0.22, abs=1e-12)

    def test_independence_at_zero(self):
        pmf = one_factor_pmf(4, 0.3, 0.0)
        assert correlation_of(pmf) == pytest.approx(0.0, abs=1e-12)

    def test_sampled_pair_moment(self):
        batch = sample_one_factor(5, 0.4, 0.25, 100_000, seed=15)
        se = math.sqrt(0.22 * 0.78 / 100_000)
        assert abs(pair_moment(batch.rows) - 0.22) < 4 * se
        np.testing.assert_array_equal(batch.rows.sum(axis=1), batch.sums)

    @pytest.mark.parametrize('rho', [0.1, 0.25, 0.6])
    def test_sampled_mu2_d6(self, rho):
        batch = sample_one_factor(6, 0.4, rho, 100_000, seed=60, sum_only=True)
        mu2, se = mu2_estimate(batch.sums, 6)
        assert abs(mu2 - (0.16 + rho * 0.24)) < 4.5 * se

    def test_sum_only_matches_full(self):
        full = sample_one_factor(6, 0.4, 0.5, 3000, seed=16)
        sums = sample_one_factor(6, 0.4, 0.5, 3000, seed=16, sum_only=True)
        np.testing.assert_array_equal(full.sums, sums.sums)

    def test_negative_correlation_rejected(self):
        with pytest.raises(DomainError):
            sample_one_factor(5, 0.4, -0.1, 10, seed=1)
        with pytest.raises(DomainError):
            FamilySpec(FamilyKind.ONE_FACTOR, rho=-0.1)


class TestBetaMixture:

    def test_params(self):
        a, b = beta_mixture_params(0.4, 0.25)
        assert a == pytest.approx(1.2)
        assert b == pytest.approx(1.8)

    def test_moments_of_uniform_mixing(self):
        p, mu2, rho = beta_mixture_moments(1.0, 1.0)
        assert p == pytest.approx(0.5)
        assert mu2 == pytest.approx(1 / 3)
        assert rho == pytest.approx(1 / 3)

    def test_pmf_has_target_mu2(self):
        a, b = beta_mixture_params(0.4, 0.25)
        pmf = beta_mixture_pmf(6, a, b)
        assert pmf.mean() == pytest.approx(2.4, abs=1e-10)
        assert cross_moment(pmf, 2) == pytest.approx(0.22, abs=1e-10)

    def test_sampled_mean(self):
        batch = sample_beta_mixture(6, 1.2, 1.8, 50_000, seed=17, sum_only=True)
        assert abs(batch.sums.mean() - 2.4) < 4 * 3.0 / math.sqrt(50_000)

    @pytest.mark.parametrize('rho', [0.1, 0.25, 0.6])
    def test_sampled_mu2_d6(self, rho):
        a, b = beta_mixture_params(0.4, rho)
        batch = sample_beta_mixture(6, a, b, 100_000, seed=61, sum_only=True)
        mu2, se = mu2_estimate(batch.sums, 6)
        assert abs(mu2 - (0.16 + rho * 0.24)) < 4.5 * se

    def test_family_dispatch_matches_direct(self):
        via_family = sample_family(FamilySpec(FamilyKind.BETA_MIXTURE, rho=0.25), 6, 0.4, 500, seed=18)
        a, b = beta_mixture_params(0.4, 0.25)
        direct = sample_beta_mixture(6, a, b, 500, seed=18)
        np.testing.assert_array_equal(via_family.rows, direct.rows)

    def test_negative_correlation_rejected(self):
        with pytest.raises(DomainError):
            beta_mixture_params(0.4, -0.1)
        with pytest.raises(DomainError):
            FamilySpec(FamilyKind.BETA_MIXTURE, rho=-0.1)
        with pytest.raises(DomainError):
            sample_beta_mixture(4, 0.0, 1.0, 10, seed=1)


class TestUniformSampling:

    def test_pmfs_lie_in_class(self):
        for pmf in sample_uniform_pmfs(3, 0.4, 500, seed=19):
            assert pmf.mean() == pytest.approx(1.2, abs=1e-12)
            assert np.all(pmf.probs >= 0)

    def test_free_mean_simplex(self):
        matrix = uniform_pmf_matrix(4, None, 20_000, seed=20)
        assert matrix.shape == (20_000, 5)
        # flat Dirichlet on 5 cells: each coordinate has mean 1/5
        np.testing.assert_allclose(matrix.mean(axis=0), 0.2, atol=0.01)

    def test_reproducible(self):
        np.testing.assert_array_equal(uniform_pmf_matrix(6, 0.4, 100, seed=21), uniform_pmf_matrix(6, 0.4, 100, seed=21))

    def test_joint_mean_correlation(self):
        joint = joint_mean_correlation(3, 2000, seed=22)
        assert joint.shape[1] == 2
        assert np.all((joint[:, 0] > 0) & (joint[:, 0] < 1))
        assert np.all(joint[:, 1] >= -0.5 - 1e-9)
        assert np.all(joint[:, 1] <= 1 + 1e-9)

    def test_joint_needs_pairs(self):
        with pytest.raises(DomainError):
            joint_mean_correlation(1, 10, seed=1)

    @pytest.mark.parametrize('d, p, seed', [(3, 0.4, 70), (6, 0.4, 71)])
    def test_mean_of_draws_is_centroid(self, d, p, seed):
        poly = embed(class_vertices(d, p))
        mesh = Delaunay(poly.coords)
        total, moment = 0.0, np.zeros(poly.affine_dim)
        for simplex in mesh.simplices:
            corners = poly.coords[simplex]
            volume = abs(np.linalg.det(corners[1:] - corners[0]))
            total += volume
            moment += volume * corners.mean(axis=0)
        centroid = poly.lift(moment / total)

        n = 40_000
        matrix = uniform_pmf_matrix(d, p, n, seed=seed)
        se = matrix.std(axis=0, ddof=1) / math.sqrt(n)
        assert np.all(np.abs(matrix.mean(axis=0) - centroid) <= 4.5 * se + 1e-12)


class TestEntropyDistribution:

    entropy = MeasureSpec(MeasureKind.ENTROPY)

    def test_support(self):
        values = empirical_measure_values(3, 0.4, self.entropy, 20_000, seed=72)
        assert np.all(values > 0)
        assert np.all(values <= math.log(4) + 1e-12)

    @pytest.mark.parametrize('d, p, seed', [(3, 0.4, 73), (6, 0.4, 74)])
    def test_unimodal(self, d, p, seed):
        values = empirical_measure_values(d, p, self.entropy, 50_000, seed=seed)
        counts, _ = np.histogram(values, bins=8)
        assert is_unimodal(counts)

    def test_exceeds_every_ray(self):
        values = empirical_measure_values(3, 0.4, self.entropy, 5000, seed=75)
        ray_max = max(self.entropy.evaluate(ray.pmf()) for ray in enumerate_rays(3, 0.4))
        assert values.max() > ray_max

    def test_cdf_on_grid(self):
        grid = np.linspace(0.0, math.log(4), 41)
        cdf = empirical_measure_distribution(3, 0.4, self.entropy, 5000, seed=76, grid=grid)
        assert cdf.values[0] == 0.0
        assert cdf.values[-1] == pytest.approx(1.0)
        assert np.all(np.diff(cdf.values) >= 0)


class TestJointMeanCorrelation:

    @pytest.fixture(scope='class')
    def joint(self):
        return joint_mean_correlation(3, 50_000, seed=77)

    def test_floor_is_minus_half(self, joint):
        assert np.all(joint[:, 1] >= -0.5 - 1e-9)

    def test_floor_approached_near_one_third_and_two_thirds(self, joint):
        p, rho = joint[:, 0], joint[:, 1]
        assert rho[p < 0.5].min() < -0.42
        assert rho[p > 0.5].min() < -0.42
        low = p[rho < -0.4]
        assert np.all(np.minimum(np.abs(low - 1 / 3), np.abs(low - 2 / 3)) < 0.06)


class TestFamilyCurves:

    def test_keys_and_ranges(self):
        curves = family_curves(6, 0.4, steps=5)
        assert len(curves['ray_family']) == 5
        assert all(entry['rho'] >= 0 for entry in curves['one_factor'])
        assert all(0 < entry['rho'] < 1 for entry in curves['beta_mixture'])
        for entry in curves['ray_family']:
            assert sum(entry['pmf']) == pytest.approx(1.0)

    def test_too_few_steps(self):
        with pytest.raises(DomainError):
            family_curves(6, 0.4, steps=1)
