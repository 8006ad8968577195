import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kocal.errors import ConditioningError, InputError, TheoryDomainError
from kocal.experiments import make_design
from kocal.kernel import (
    Design,
    MaternKernel,
    cholesky,
    correlation,
    cross_cov,
    gram,
    matern,
    spectral_bounds,
    spectral_density,
)
from oracles import fourier_transform_1d, gram_ref, matern_ref

upsilons = st.sampled_from([0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 0.7, 1.3])
gammas = st.floats(0.2, 5.0)


class TestMatern:
    def test_same_point_is_one(self):
        for ups in (0.5, 1.0, 1.7, 2.5):
            assert matern([0.3, 0.2], [0.3, 0.2], MaternKernel(ups, 2.0, 2)) == 1.0

    def test_exponential_case(self):
        k = MaternKernel(0.5, 1.0)
        assert matern(0.0, 1.0, k) == pytest.approx(0.243117, abs=5e-7)
        assert matern(0.0, 1.0, k) == pytest.approx(matern_ref(1.0, 0.5, 1.0), rel=1e-10)

    def test_three_halves_case(self):
        k = MaternKernel(1.5, 1.0)
        assert matern(0.0, 1.0, k) == pytest.approx((1 + math.sqrt(6)) * math.exp(-math.sqrt(6)), rel=1e-14)
        assert matern(0.0, 1.0, k) == pytest.approx(0.297821, abs=5e-7)
        assert matern(0.0, 1.0, k) == pytest.approx(matern_ref(1.0, 1.5, 1.0), rel=1e-10)

    @pytest.mark.parametrize("ups", [0.5, 0.7, 1.0, 1.5, 2.0, 2.5, 3.0, 3.4])
    @pytest.mark.parametrize("r", [1e-3, 0.05, 0.4, 1.0, 3.0])
    def test_matches_quadrature_bessel(self, ups, r):
        k = MaternKernel(ups, 1.3)
        assert correlation(r, k) == pytest.approx(matern_ref(r, ups, 1.3), rel=1e-9, abs=1e-14)

    def test_tiny_distance_returns_limit(self):
        k = MaternKernel(1.2, 1.0)
        assert correlation(1e-13, k) == 1.0

    def test_far_distance_is_zero_not_nan(self):
        k = MaternKernel(1.2, 1.0)
        assert correlation(1e4, k) == 0.0

    def test_non_finite_rejected(self):
        with pytest.raises(InputError):
            matern(np.nan, 0.0, MaternKernel(1.0, 1.0))

    @pytest.mark.parametrize("bad", [dict(upsilon=0.0, gamma=1.0), dict(upsilon=1.0, gamma=-1.0),
                                     dict(upsilon=1.0, gamma=1.0, dim=0)])
    def test_invalid_kernel(self, bad):
        with pytest.raises(InputError):
            MaternKernel(**bad)

    def test_theory_domain(self):
        with pytest.raises(TheoryDomainError):
            MaternKernel(0.5, 1.0).require_theory()
        MaternKernel(1.0, 1.0).require_theory()

    @given(upsilons, gammas, st.lists(st.floats(-3, 3), min_size=4, max_size=4))
    def test_symmetric_and_bounded(self, ups, gam, xs):
        k = MaternKernel(ups, gam, 2)
        s, t = np.array(xs[:2]), np.array(xs[2:])
        a, b = matern(s, t, k), matern(t, s, k)
        assert a == b
        if np.linalg.norm(s - t) * k.rate > 1e-6:
            assert 0.0 <= a < 1.0
        else:
            assert a == pytest.approx(1.0)

    @given(upsilons, gammas, st.lists(st.floats(-2, 2), min_size=6, max_size=6))
    def test_stationary(self, ups, gam, xs):
        k = MaternKernel(ups, gam, 2)
        s, t, shift = np.array(xs[:2]), np.array(xs[2:4]), np.array(xs[4:])
        assert matern(s + shift, t + shift, k) == pytest.approx(matern(s, t, k), rel=1e-12, abs=1e-15)

    def test_monotone_in_distance(self):
        r = np.linspace(0, 3, 200)
        for ups in (0.5, 1.0, 2.2):
            c = correlation(r, MaternKernel(ups, 1.0))
            assert np.all(np.diff(c) <= 0)


class TestGram:
    def test_single_point(self):
        g = gram(Design([[0.4]]), MaternKernel(1.0, 1.0), jitter=0.0)
        np.testing.assert_array_equal(g.entries, [[1.0]])

    def test_duplicate_points_rejected(self):
        with pytest.raises(InputError):
            Design([[0.2], [0.2]])

    def test_near_duplicate_reports_pivot(self):
        d = Design([[0.2], [0.2 + 1e-13]])
        with pytest.raises(ConditioningError) as info:
            gram(d, MaternKernel(2.5, 1.0), jitter=0.0)
        assert info.value.order == 2
        assert "pivot" in str(info.value)
        assert info.value.jitter == 0.0

    def test_two_points_exponential(self):
        g = gram(Design([[0.0], [1.0]]), MaternKernel(0.5, 1.0), jitter=0.0)
        assert g.entries[0, 1] == pytest.approx(math.exp(-math.sqrt(2)), rel=1e-14)

    def test_matches_reference_entries(self):
        d = make_design("uniform", 7, [[0, 1], [0, 1]], 3)
        g = gram(d, MaternKernel(1.0, 0.8, 2), jitter=1e-8)
        np.testing.assert_allclose(g.entries, gram_ref(d.points, 1.0, 0.8, 1e-8), rtol=1e-9, atol=1e-14)

    def test_diagonal_and_symmetry(self):
        d = make_design("uniform", 20, [[0, 1]], 1)
        g = gram(d, MaternKernel(1.5, 2.0), jitter=1e-6)
        np.testing.assert_array_equal(np.diag(g.entries), 1.0 + 1e-6)
        np.testing.assert_array_equal(g.entries, g.entries.T)

    def test_negative_jitter_rejected(self):
        with pytest.raises(InputError):
            gram(Design([[0.1]]), MaternKernel(1.0, 1.0), jitter=-1.0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 40), st.integers(1, 3), upsilons, st.floats(0.5, 4.0), st.integers(0, 10**6))
    def test_positive_definite_with_jitter(self, n, d, ups, gam, seed):
        design = make_design("stratified", n, [[0, 1]] * d, seed)
        g = gram(design, MaternKernel(ups, gam, d), jitter=1e-10 if ups <= 1.5 else 1e-8)
        assert np.all(np.diag(g.factor) > 0)

    def test_solve_and_logdet(self):
        d = make_design("uniform", 6, [[0, 1]], 5)
        g = gram(d, MaternKernel(1.5, 1.0), jitter=1e-8)
        b = np.arange(6.0)
        np.testing.assert_allclose(g.entries @ g.solve(b), b, atol=1e-8)
        assert g.logdet() == pytest.approx(float(np.sum(np.log(np.linalg.eigvalsh(g.entries)))), rel=1e-8)

    def test_cholesky_rejects_indefinite(self):
        with pytest.raises(ConditioningError) as info:
            cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))
        assert info.value.pivot == pytest.approx(-3.0)


class TestCrossCov:
    def test_query_equals_design(self):
        d = make_design("uniform", 9, [[0, 1]], 2)
        k = MaternKernel(1.0, 1.5)
        np.testing.assert_array_equal(cross_cov(d, d.points, k), gram(d, k, 0.0).entries)

    def test_far_query(self):
        d = Design([[0.0], [0.5]], [[0, 1]])
        assert np.all(cross_cov(d, [[1e5]], MaternKernel(1.0, 1.0)) == 0.0)

    def test_single_entry(self):
        c = cross_cov(Design([[0.0]]), [[1.0]], MaternKernel(0.5, 1.0))
        assert c.shape == (1, 1)
        assert c[0, 0] == pytest.approx(math.exp(-math.sqrt(2)), rel=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            cross_cov(Design([[0.0]]), [[1.0, 2.0]], MaternKernel(1.0, 1.0))


class TestSpectral:
    def test_zero_frequency_value(self):
        assert spectral_density([0.0], MaternKernel(1.0, 1.0)) == pytest.approx(math.sqrt(2 * math.pi) / 4, rel=1e-14)
        assert spectral_density([0.0], MaternKernel(1.0, 1.0)) == pytest.approx(0.626657, abs=1e-6)

    @pytest.mark.parametrize("ups,gam", [(1.0, 1.0), (1.5, 0.7), (2.0, 2.0), (0.5, 1.0)])
    @pytest.mark.parametrize("omega", [0.0, 0.5, 2.0, 7.0])
    def test_matches_numerical_transform(self, ups, gam, omega):
        k = MaternKernel(ups, gam)
        ref = fourier_transform_1d(lambda r: float(correlation(r, k)), omega, upper=80.0 / gam)
        assert spectral_density([omega], k) == pytest.approx(ref, rel=1e-6, abs=1e-10)

    def test_tail_exponent(self):
        k = MaternKernel(1.5, 1.0, 2)
        w = np.array([1e4, 1e5])
        vals = [spectral_density([x, 0.0], k) for x in w]
        slope = np.log(vals[1] / vals[0]) / np.log(w[1] / w[0])
        assert slope == pytest.approx(-(2 * 1.5 + 2), abs=1e-6)

    @given(upsilons, gammas, st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=2))
    def test_positive(self, ups, gam, w):
        assert spectral_density(w, MaternKernel(ups, gam, 2)) > 0

    def test_vectorized(self):
        k = MaternKernel(1.0, 1.0, 2)
        w = np.array([[0.0, 0.0], [1.0, 2.0]])
        np.testing.assert_allclose(spectral_density(w, k), [spectral_density(x, k) for x in w])


class TestSpectralBounds:
    def test_value(self):
        c1, c2 = spectral_bounds(1.0, 1.0, 1.0, 1)
        assert c1 == pytest.approx(2 * math.sqrt(2 * math.pi), rel=1e-14)
        assert c1 == pytest.approx(5.01326, abs=1e-5)
        assert c1 >= c2

    def test_widening(self):
        for ups in (1.0, 2.0):
            for d in (1, 2, 3):
                c1, c2 = spectral_bounds(ups, 0.8, 1.2, d)
                w1, w2 = spectral_bounds(ups, 0.5, 2.0, d)
                assert w1 >= c1 and w2 <= c2

    def test_brackets_density_single_gamma(self):
        w = np.logspace(-4, 4, 60)
        for ups in (1.0, 1.5, 2.0):
            c1, c2 = spectral_bounds(ups, 1.3, 1.3, 1)
            v = spectral_density(w[:, None], MaternKernel(ups, 1.3))
            env = (1 + w**2) ** (-(ups + 0.5))
            assert np.all(v <= c1 * env * (1 + 1e-12)) and np.all(v >= c2 * env * (1 - 1e-12))

    def test_errors(self):
        with pytest.raises(InputError):
            spectral_bounds(1.0, 2.0, 1.0, 1)
        with pytest.raises(TheoryDomainError):
            spectral_bounds(0.5, 1.0, 1.0, 1)
