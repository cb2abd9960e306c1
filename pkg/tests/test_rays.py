# tests/test_rays.py
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import linprog

from polytope.errors import DimensionError, DomainError, InvariantError
from polytope.rays import (
    ExchangeablePmf,
    MixtureWeights,
    RayDensity,
    RayMixture,
    SumPmf,
    enumerate_rays,
    exchangeable_simplex_vertices,
    frechet_upper_ray,
    integer_mean,
    map_H,
    map_H_inv,
    min_mu2_ray,
    mixture_pmf,
    random_weights,
    ray_count,
    rays_to_dict,
)


# Ray pmfs rounded to three decimals, one column per ray
TABLE_E3 = [
    (0.4, 0, 0.6, 0),
    (0.6, 0, 0, 0.4),
    (0, 0.8, 0.2, 0),
    (0, 0.9, 0, 0.1),
]

TABLE_E6 = [
    (0.2, 0, 0, 0.8, 0, 0, 0),
    (0.4, 0, 0, 0, 0.6, 0, 0),
    (0.52, 0, 0, 0, 0, 0.48, 0),
    (0.6, 0, 0, 0, 0, 0, 0.4),
    (0, 0.3, 0, 0.7, 0, 0, 0),
    (0, 0.533, 0, 0, 0.467, 0, 0),
    (0, 0.65, 0, 0, 0, 0.35, 0),
    (0, 0.72, 0, 0, 0, 0, 0.28),
    (0, 0, 0.6, 0.4, 0, 0, 0),
    (0, 0, 0.8, 0, 0.2, 0, 0),
    (0, 0, 0.867, 0, 0, 0.133, 0),
    (0, 0, 0.9, 0, 0, 0, 0.1),
]

TABLE_S5 = [
    (0.167, 0, 0, 0.833, 0, 0),
    (0.375, 0, 0, 0, 0.625, 0),
    (0.5, 0, 0, 0, 0, 0.5),
    (0, 0.25, 0, 0.75, 0, 0),
    (0, 0.5, 0, 0, 0.5, 0),
    (0, 0.625, 0, 0, 0, 0.375),
    (0, 0, 0.5, 0.5, 0, 0),
    (0, 0, 0.75, 0, 0.25, 0),
    (0, 0, 0.833, 0, 0, 0.167),
]


def assert_same_columns(rays, table, tol=5e-4):
    computed = [ray.pmf().probs for ray in rays]
    assert len(computed) == len(table)
    unmatched = [np.array(col, dtype=float) for col in table]
    for probs in computed:
        hits = [i for i, col in enumerate(unmatched) if np.max(np.abs(col - probs)) <= tol]
        assert hits, f"ray {probs} not in table"
        unmatched.pop(hits[0])
    assert not unmatched


class TestSumPmf:

    def test_rejects_bad_length(self):
        with pytest.raises(DimensionError):
            SumPmf(3, [0.5, 0.5])

    def test_rejects_negative_mass(self):
        with pytest.raises(InvariantError):
            SumPmf(2, [1.2, -0.2, 0.0])

    def test_rejects_unnormalized(self):
        with pytest.raises(InvariantError):
            SumPmf(2, [0.5, 0.4, 0.0])

    def test_mean_and_cdf(self):
        pmf = SumPmf(3, [0.4, 0, 0.6, 0])
        assert pmf.mean() == pytest.approx(1.2)
        np.testing.assert_allclose(pmf.cdf(), [0.4, 0.4, 1.0, 1.0])

    def test_is_read_only(self):
        pmf = SumPmf(1, [0.5, 0.5])
        with pytest.raises(ValueError):
            pmf.probs[0] = 1.0

    def test_tolerance_does_not_grow_with_d(self):
        d = 100_000
        probs = np.full(d + 1, 1.0 / (d + 1))
        assert SumPmf(d, probs).d == d
        probs[0] += 1e-10
        with pytest.raises(InvariantError):
            SumPmf(d, probs)


class TestMapH:

    def test_binomial_weights(self):
        f = ExchangeablePmf(3, [0.1, 0.4 / 3, 0.4 / 3, 0.1])
        np.testing.assert_allclose(map_H(f).probs, [0.1, 0.4, 0.4, 0.1])

    def test_round_trip(self):
        pmf = SumPmf(6, [0.2, 0, 0, 0.8, 0, 0, 0])
        np.testing.assert_allclose(map_H(map_H_inv(pmf)).probs, pmf.probs, atol=1e-14)

    def test_simplex_vertices_map_to_unit_vectors(self):
        for j, vertex in enumerate(exchangeable_simplex_vertices(4)):
            np.testing.assert_allclose(map_H(vertex).probs, np.eye(5)[j], atol=1e-15)

    def test_cell_mass(self):
        f = ExchangeablePmf(2, [0.25, 0.25, 0.25])
        assert f.cell_mass((1, 0)) == pytest.approx(0.25)
        with pytest.raises(DimensionError):
            f.cell_mass((1, 0, 1))


class TestIntegerMean:

    def test_detects_integer(self):
        assert integer_mean(5, 0.4) == (True, 2.0)

    def test_fractional(self):
        is_int, m = integer_mean(3, 0.4)
        assert not is_int
        assert m == pytest.approx(1.2)

    def test_forcing_integer_branch_on_fraction_fails(self):
        with pytest.raises(DomainError):
            integer_mean(3, 0.4, integer_branch=True)


class TestEnumerateRays:

    def test_table_e3(self):
        rays = enumerate_rays(3, 0.4)
        assert_same_columns(rays, TABLE_E3)

    def test_table_e3_order(self):
        assert [ray.support for ray in enumerate_rays(3, 0.4)] == [(0, 2), (0, 3), (1, 2), (1, 3)]

    def test_table_e6(self):
        assert_same_columns(enumerate_rays(6, 0.4), TABLE_E6)

    def test_table_s5_half(self):
        rays = enumerate_rays(5, 0.5)
        assert_same_columns(rays, TABLE_S5)
        assert [ray.support for ray in rays] == [
            (0, 3), (0, 4), (0, 5), (1, 3), (1, 4), (1, 5), (2, 3), (2, 4), (2, 5)]

    def test_closed_form_fractions(self):
        # d=6, p=0.4: ray on (1, 4) has masses (4 - 2.4)/3 and (2.4 - 1)/3
        ray = next(r for r in enumerate_rays(6, 0.4) if r.support == (1, 4))
        assert ray.mass[0] == pytest.approx(float(Fraction(8, 15)), abs=1e-15)
        assert ray.mass[1] == pytest.approx(float(Fraction(7, 15)), abs=1e-15)

    def test_point_mass_appended_last(self):
        rays = enumerate_rays(4, 0.5)
        assert rays[-1].is_point_mass
        assert rays[-1].support == (2,)
        assert sum(r.is_point_mass for r in rays) == 1

    def test_every_ray_has_mean_pd(self):
        for d, p in [(3, 0.4), (6, 0.4), (10, 0.35), (8, 0.25)]:
            for ray in enumerate_rays(d, p):
                assert ray.mean() == pytest.approx(p * d, abs=1e-12)
                assert ray.pmf().probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_rejects_bad_mean(self):
        with pytest.raises(DomainError):
            enumerate_rays(3, 1.0)
        with pytest.raises(DomainError):
            enumerate_rays(3, 0.0)

    def test_rejects_bad_dimension(self):
        with pytest.raises(DomainError):
            enumerate_rays(0, 0.5)

    def test_d1(self):
        rays = enumerate_rays(1, 0.3)
        assert len(rays) == 1
        np.testing.assert_allclose(rays[0].pmf().probs, [0.7, 0.3])


class TestRayCount:

    def test_matches_enumeration_on_grid(self):
        for d in range(1, 13):
            for k in range(1, 20):
                p = k / 20
                assert ray_count(d, p) == len(enumerate_rays(d, p)), (d, p)

    def test_closed_forms(self):
        assert ray_count(3, 0.4) == 4
        assert ray_count(6, 0.4) == 12
        # integer pd: d^2 p q + 1
        assert ray_count(5, 0.4) == round(25 * 0.4 * 0.6) + 1
        assert ray_count(10, 0.5) == 26

    def test_non_integer_form(self):
        d, p = 11, 0.3
        j1 = math.floor(p * d)
        assert ray_count(d, p) == (j1 + 1) * (d - j1)


def brute_force_vertices(d, p):
    """Basic feasible solutions of {x >= 0, sum x = 1, sum j x_j = pd} over every support of size 1 or 2"""
    A = np.vstack([np.ones(d + 1), np.arange(d + 1)])
    b = np.array([1.0, p * d])
    vertices = []
    for size in (1, 2):
        for support in itertools.combinations(range(d + 1), size):
            cols = A[:, support]
            if np.linalg.matrix_rank(cols) < size:
                continue
            x, *_ = np.linalg.lstsq(cols, b, rcond=None)
            if np.linalg.norm(cols @ x - b) > 1e-9 or np.any(x < -1e-12):
                continue
            full = np.zeros(d + 1)
            full[list(support)] = np.clip(x, 0.0, None)
            if not any(np.allclose(full, v, atol=1e-10) for v in vertices):
                vertices.append(full)
    return vertices


class TestExtremality:

    @pytest.mark.parametrize('d, p', [(2, 0.4), (3, 0.4), (4, 0.5), (5, 0.4), (5, 0.5), (6, 0.4), (6, 1 / 3)])
    def test_no_ray_is_a_mixture_of_the_others(self, d, p):
        R = np.column_stack([ray.pmf().probs for ray in enumerate_rays(d, p)])
        for i in range(R.shape[1]):
            others = np.delete(R, i, axis=1)
            A_eq = np.vstack([others, np.ones(others.shape[1])])
            b_eq = np.append(R[:, i], 1.0)
            result = linprog(np.zeros(others.shape[1]), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method='highs')
            assert result.status == 2, f"ray {i} of E_{d}({p}) is a convex combination of the others"

    @pytest.mark.parametrize('d', [1, 2, 3, 4, 5])
    @pytest.mark.parametrize('p', [0.2, 0.25, 0.4, 0.5, 0.7])
    def test_complete_against_vertex_enumeration(self, d, p):
        expected = brute_force_vertices(d, p)
        rays = [ray.pmf().probs for ray in enumerate_rays(d, p)]
        assert len(rays) == len(expected)
        for v in expected:
            assert any(np.allclose(v, r, atol=1e-10) for r in rays)


class TestSpecialRays:

    def test_frechet_upper(self):
        ray = frechet_upper_ray(3, 0.4)
        np.testing.assert_allclose(ray.pmf().probs, [0.6, 0, 0, 0.4])

    def test_min_mu2_ray_adjacent_integers(self):
        assert min_mu2_ray(3, 0.4).support == (1, 2)
        assert min_mu2_ray(5, 0.4).support == (2,)

    def test_min_mu2_ray_large_d(self):
        ray = min_mu2_ray(100_000, 0.4)
        assert ray.is_point_mass
        assert ray.support == (40_000,)

    def test_ray_invariants(self):
        with pytest.raises(InvariantError):
            RayDensity(3, 0.4, (2, 1), (0.5, 0.5))
        with pytest.raises(InvariantError):
            RayDensity(3, 0.4, (0, 1, 2), (0.3, 0.3, 0.4))

    def test_point_mass_weight_must_be_one(self):
        assert RayDensity(5, 0.4, (2,), (1.0,)).mean() == pytest.approx(2.0)
        with pytest.raises(InvariantError):
            RayDensity(5, 0.4, (2,), (0.9,))

    def test_ray_mean_must_be_pd(self):
        with pytest.raises(InvariantError):
            RayDensity(3, 0.4, (0, 2), (0.5, 0.5))
        with pytest.raises(InvariantError):
            RayDensity(5, 0.4, (3,), (1.0,))


class TestMixture:

    def test_unit_weights_give_ray(self):
        rays = enumerate_rays(3, 0.4)
        pmf = mixture_pmf(rays, MixtureWeights.unit(4, 2))
        np.testing.assert_allclose(pmf.probs, rays[2].pmf().probs)

    def test_mixture_has_mean_pd(self):
        rays = enumerate_rays(6, 0.4)
        pmf = mixture_pmf(rays, random_weights(len(rays), seed=3))
        assert pmf.mean() == pytest.approx(2.4, abs=1e-12)

    def test_rounded_weights_reproduce_rounded_pmf(self):
        rays = enumerate_rays(5, 0.5)
        weights = MixtureWeights(np.array([0.1, 0.019, 0.015, 0.188, 0.202, 0.008, 0.173, 0.174, 0.121]))
        pmf = mixture_pmf(rays, weights)
        np.testing.assert_allclose(pmf.probs, [0.031, 0.153, 0.318, 0.311, 0.156, 0.031], atol=3e-3)

    def test_weights_renormalized(self):
        w = MixtureWeights(np.array([1.0, 3.0]))
        np.testing.assert_allclose(w.weights, [0.25, 0.75])

    def test_weights_rejected(self):
        with pytest.raises(InvariantError):
            MixtureWeights(np.array([0.0, 0.0]))
        with pytest.raises(InvariantError):
            MixtureWeights(np.array([0.5, -0.1]))

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            mixture_pmf(enumerate_rays(3, 0.4), MixtureWeights.uniform(3))

    def test_mixed_classes_rejected(self):
        with pytest.raises(DimensionError):
            mixture_pmf([enumerate_rays(3, 0.4)[0], enumerate_rays(4, 0.4)[0]], MixtureWeights.uniform(2))

    def test_ray_mixture_dense(self):
        rays = enumerate_rays(3, 0.4)
        mixture = RayMixture((rays[1], rays[3]), MixtureWeights(np.array([0.25, 0.75])))
        np.testing.assert_allclose(mixture.dense(rays).weights, [0, 0.25, 0, 0.75])
        np.testing.assert_allclose(mixture.pmf().probs, 0.25 * rays[1].pmf().probs + 0.75 * rays[3].pmf().probs)

    def test_random_weights_reproducible(self):
        np.testing.assert_array_equal(random_weights(5, 7).weights, random_weights(5, 7).weights)


class TestRaysToDict:

    def test_format(self):
        data = rays_to_dict(3, 0.4, enumerate_rays(3, 0.4))
        assert data['d'] == 3 and data['p'] == 0.4
        assert data['rays'][0] == {'support': [0, 2], 'mass': [pytest.approx(0.4), pytest.approx(0.6)]}
