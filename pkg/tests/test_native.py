import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kocal.errors import InputError
from kocal.experiments import make_design
from kocal.kernel import Design, MaternKernel, gram
from kocal.native import (
    compensated_matvec,
    NativeElement,
    eval_interpolant,
    fill_distance,
    inner_product,
    interpolate,
    native_norm_sq,
    power_function,
)


def random_element(rng, kernel, m, d=1):
    centers = make_design("stratified", m, [[0, 1]] * d, rng).points
    return NativeElement(kernel, centers, rng.standard_normal(m))


class TestInterpolate:
    def test_single_point(self):
        k = MaternKernel(1.0, 1.0)
        s = interpolate(Design([[0.3]]), [3.0], k)
        np.testing.assert_allclose(s.coefficients, [3.0], rtol=1e-12)
        x = np.array([[0.3], [0.9]])
        np.testing.assert_allclose(s(x), 3.0 * k([[0.3]], x)[0], rtol=1e-12)

    def test_zero_data(self):
        s = interpolate(make_design("grid", 5, [[0, 1]]), np.zeros(5), MaternKernel(1.5, 1.0))
        assert np.all(s.coefficients == 0)
        assert np.all(s(np.linspace(0, 1, 11)) == 0)

    def test_reproduces_kernel_translate(self):
        k = MaternKernel(1.5, 2.0)
        design = make_design("grid", 9, [[0, 1]])
        f = NativeElement(k, [[0.375]], [1.0])
        s = interpolate(design, f(design.points), k)
        q = np.linspace(0, 1, 101)
        np.testing.assert_allclose(s(q), f(q), atol=1e-8)

    def test_jittered_system_residual(self):
        rng = np.random.default_rng(0)
        k = MaternKernel(1.5, 1.0)
        design = make_design("stratified", 40, [[0, 1]], rng)
        y = rng.standard_normal(40)
        s = interpolate(design, y, k, max_refine=0)
        r = s.gram.entries @ s.coefficients - y
        assert np.linalg.norm(r) <= 1e-8 * np.linalg.norm(y)

    def test_refinement_improves_node_error(self):
        rng = np.random.default_rng(1)
        k = MaternKernel(2.0, 1.0)
        design = make_design("stratified", 30, [[0, 1]], rng)
        y = rng.standard_normal(30)
        plain = np.max(np.abs(interpolate(design, y, k, max_refine=0)(design.points) - y))
        refined = np.max(np.abs(interpolate(design, y, k)(design.points) - y))
        assert refined <= plain
        assert refined <= 1e-8 * np.max(np.abs(y))

    def test_compensated_matvec(self):
        # terms cancel to leave a value far below the rounding of the largest term
        K = np.array([[1.0, 1.0, 1.0]])
        hi = np.array([1e16, 1.0, -1e16])
        assert compensated_matvec(K, hi)[0] == 1.0
        assert compensated_matvec(K, hi, np.array([0.0, 2**-60, 0.0]), offset=[1.0])[0] == pytest.approx(-(2**-60))
        rng = np.random.default_rng(0)
        A, v = rng.standard_normal((5, 7)), rng.standard_normal(7)
        np.testing.assert_allclose(compensated_matvec(A, v), A @ v, rtol=1e-13)

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            interpolate(make_design("grid", 3, [[0, 1]]), [1.0, 2.0], MaternKernel(1.0, 1.0))

    def test_non_finite_data(self):
        with pytest.raises(InputError):
            interpolate(make_design("grid", 2, [[0, 1]]), [1.0, np.inf], MaternKernel(1.0, 1.0))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 64), st.integers(1, 2), st.sampled_from([0.5, 1.0, 1.5, 2.0, 2.5]),
           st.floats(1.0, 4.0), st.integers(0, 10**6))
    def test_node_exactness(self, n, d, ups, gam, seed):
        rng = np.random.default_rng(seed)
        design = make_design("stratified", n, [[0, 1]] * d, rng)
        y = rng.standard_normal(n)
        s = interpolate(design, y, MaternKernel(ups, gam, d))
        assert np.max(np.abs(s(design.points) - y)) <= 1e-8 * np.max(np.abs(y))


class TestEvaluate:
    def test_single_center(self):
        k = MaternKernel(0.5, 1.0)
        s = interpolate(Design([[0.0]], [[0, 2]]), [3.0], k)
        assert eval_interpolant(s, [[1.0]])[0] == pytest.approx(3 * math.exp(-math.sqrt(2)), rel=1e-12)

    def test_dimension_mismatch(self):
        s = interpolate(Design([[0.0]]), [1.0], MaternKernel(1.0, 1.0))
        with pytest.raises(InputError):
            eval_interpolant(s, [[0.1, 0.2]])

    def test_element_matches_interpolant(self):
        design = make_design("grid", 6, [[0, 1]])
        s = interpolate(design, np.arange(6.0), MaternKernel(1.0, 2.0))
        q = np.linspace(0, 1, 17)
        # the element drops the low-order coefficient part, a rounding-level change
        np.testing.assert_allclose(s.as_element()(q), s(q), rtol=1e-13, atol=1e-14)


class TestInnerProduct:
    def test_single_translate_has_unit_norm(self):
        k = MaternKernel(1.3, 0.7)
        a = NativeElement(k, [[0.2]], [1.0])
        assert inner_product(a, a) == pytest.approx(1.0, rel=1e-15)

    def test_zero_element(self):
        k = MaternKernel(1.0, 1.0)
        a = NativeElement(k, [[0.2]], [1.0])
        assert inner_product(a, NativeElement(k, np.zeros((0, 1)), [])) == 0.0
        assert inner_product(a, 0.0 * a) == 0.0

    @given(st.integers(0, 10**6))
    def test_cauchy_schwarz(self, seed):
        rng = np.random.default_rng(seed)
        k = MaternKernel(1.5, 1.2, 2)
        a, b = random_element(rng, k, 5, 2), random_element(rng, k, 4, 2)
        assert inner_product(a, b) ** 2 <= inner_product(a, a) * inner_product(b, b) * (1 + 1e-12)

    def test_kernel_mismatch(self):
        a = NativeElement(MaternKernel(1.0, 1.0), [[0.1]], [1.0])
        b = NativeElement(MaternKernel(1.0, 2.0), [[0.1]], [1.0])
        with pytest.raises(InputError):
            inner_product(a, b)

    def test_linearity(self):
        rng = np.random.default_rng(3)
        k = MaternKernel(1.0, 1.0)
        a, b, c = (random_element(rng, k, 4) for _ in range(3))
        lhs = inner_product(2.0 * a + b, c)
        assert lhs == pytest.approx(2 * inner_product(a, c) + inner_product(b, c), rel=1e-12)


class TestNativeNorm:
    def test_zero(self):
        s = interpolate(make_design("grid", 3, [[0, 1]]), np.zeros(3), MaternKernel(1.0, 1.0))
        assert native_norm_sq(s) == 0.0

    def test_single_point(self):
        s = interpolate(Design([[0.5]]), [3.0], MaternKernel(1.0, 1.0))
        assert native_norm_sq(s) == pytest.approx(9.0, rel=1e-12)

    def test_nested_designs_monotone(self):
        k = MaternKernel(1.5, 1.0)
        f = NativeElement(k, [[0.17], [0.55], [0.81]], [1.0, -0.6, 0.4])
        coarse = make_design("grid", 5, [[0, 1]])
        fine = coarse.union(Design([[0.1], [0.4], [0.6], [0.9]]))
        a = native_norm_sq(interpolate(coarse, f(coarse.points), k))
        b = native_norm_sq(interpolate(fine, f(fine.points), k))
        assert a <= b + 1e-10
        assert b <= f.norm_sq() + 1e-8


class TestIdentities:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 8), st.integers(1, 8), st.integers(1, 2), st.integers(0, 10**6))
    def test_orthogonality_and_pythagoras(self, n, m, d, seed):
        rng = np.random.default_rng(seed)
        k = MaternKernel(1.5, 1.5, d)
        f = random_element(rng, k, n + m, d)
        design = Design(f.centers[:n])
        s = interpolate(design, f(design.points), k).as_element()
        scale = f.norm_sq()
        assert abs(inner_product(s, f - s)) <= 1e-8 * scale
        assert s.norm_sq() + (f - s).norm_sq() == pytest.approx(scale, rel=1e-6)

    def test_orthogonality_in_block_form(self):
        rng = np.random.default_rng(4)
        k = MaternKernel(1.0, 1.0)
        f = random_element(rng, k, 9)
        n = 5
        x, rest = f.centers[:n], f.centers[n:]
        a1, a2 = f.coefficients[:n], f.coefficients[n:]
        A1, A2 = k(x), k(x, rest)
        u = interpolate(Design(x), f(x), k).coefficients
        assert abs(u @ (A1 @ a1 + A2 @ a2 - A1 @ u)) <= 1e-8 * f.norm_sq()

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**6))
    def test_minimum_norm(self, seed):
        rng = np.random.default_rng(seed)
        k = MaternKernel(2.0, 1.0)
        f = random_element(rng, k, 6)
        design = make_design("stratified", 5, [[0, 1]], rng)
        s = interpolate(design, f(design.points), k).as_element()
        e = random_element(rng, k, 4)
        g = e - interpolate(design, e(design.points), k).as_element()
        h = s + g
        np.testing.assert_allclose(h(design.points), f(design.points), atol=1e-8)
        assert math.sqrt(s.norm_sq()) <= math.sqrt(h.norm_sq()) + 1e-9


class TestFillDistance:
    def test_three_point_grid(self):
        assert fill_distance(Design([[0.0], [0.5], [1.0]])) == pytest.approx(0.25)

    def test_single_center(self):
        assert fill_distance(Design([[0.5]])) == pytest.approx(0.5)

    def test_square_center(self):
        h = fill_distance(Design([[0.5, 0.5]]))
        assert h == pytest.approx(math.sqrt(2) / 2, rel=1e-12)

    def test_two_d_against_dense_grid(self):
        design = make_design("uniform", 12, [[0, 1], [0, 1]], 7)
        g = np.linspace(0, 1, 401)
        grid = np.array(np.meshgrid(g, g)).reshape(2, -1).T
        dense = np.max(np.min(np.linalg.norm(grid[:, None, :] - design.points[None], axis=2), axis=1))
        assert fill_distance(design) == pytest.approx(dense, abs=1e-2)

    def test_resolution_validated(self):
        with pytest.raises(InputError):
            fill_distance(Design([[0.5, 0.5]]), resolution=1)


class TestPowerFunction:
    def test_zero_at_nodes(self):
        design = make_design("uniform", 10, [[0, 1]], 0)
        p = power_function(design, MaternKernel(1.5, 1.0), design.points)
        assert np.all(np.abs(p) <= 1e-8)

    def test_far_point(self):
        design = Design([[0.0], [0.1]], [[0, 1]])
        assert power_function(design, MaternKernel(1.0, 1.0), [[1e4]])[0] == pytest.approx(1.0)

    def test_nested_monotone(self):
        k = MaternKernel(1.5, 1.0)
        x = np.array([[0.33], [0.71]])
        coarse = make_design("grid", 4, [[0, 1]])
        fine = coarse.union(Design([[0.2], [0.5], [0.8]]))
        assert np.all(power_function(fine, k, x) <= power_function(coarse, k, x) + 1e-12)

    def test_agrees_with_interpolation_error(self):
        k = MaternKernel(2.0, 1.3)
        design = make_design("grid", 7, [[0, 1]])
        for x in (0.05, 0.37, 0.91):
            f = NativeElement(k, [[x]], [1.0])
            s = interpolate(design, f(design.points), k, jitter=1e-8, max_refine=0)
            via_interp = 1.0 - s([[x]])[0]
            assert power_function(design, k, [[x]])[0] == pytest.approx(via_interp, abs=1e-10)

    def test_range_and_empty_query(self):
        design = make_design("uniform", 8, [[0, 1]], 2)
        p = power_function(design, MaternKernel(1.0, 1.0), np.linspace(0, 1, 50))
        assert np.all((p >= 0) & (p <= 1))
        assert power_function(design, MaternKernel(1.0, 1.0), np.zeros((0, 1))).shape == (0,)

    def test_clamp_warns_on_large_negative(self):
        design = Design([[0.0], [0.5]])
        k = MaternKernel(1.0, 1.0)
        g = gram(design, k, 0.0)
        bad = type(g)(g.entries, 0.0, g.factor * 0.9)  # corrupted factor
        with warnings.catch_warnings(record=True) as rec:
            warnings.simplefilter("always")
            p = power_function(design, k, [[0.0]], gram_matrix=bad)
        assert p[0] == 0.0
        assert any("clamped" in str(w.message) for w in rec)
