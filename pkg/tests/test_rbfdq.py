import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexofpm.rbfdq import (DERIVATIVE_ORDERS, IllConditionedSupport, MultiQuadric, RBFParams,
                            build_weights, minimal_enclosing_circle, mq_derivatives,
                            mq_shifted_basis)

# centre plus the 12 lattice points within graph distance 2
LATTICE = np.array([(0, 0)] + [(i, j) for j in range(-2, 3) for i in range(-2, 3)
                               if 0 < abs(i) + abs(j) <= 2], dtype=float)


def _weights(X, c0=np.sqrt(10.0)):
    return build_weights(0, range(1, len(X)), X, c0)


def _fd_partial(fun, x, y, s, t, h):
    """Nested central differences of order (s, t)."""
    if s > 0:
        return (_fd_partial(fun, x + h, y, s - 1, t, h) - _fd_partial(fun, x - h, y, s - 1, t, h)) / (2 * h)
    if t > 0:
        return (_fd_partial(fun, x, y + h, 0, t - 1, h) - _fd_partial(fun, x, y - h, 0, t - 1, h)) / (2 * h)
    return fun(x, y)


class TestBasis:
    def test_value_at_support_point(self):
        g = mq_shifted_basis((1.0, 0.0), (0.0, 0.0), 1.0, 1.0, 0.0)
        assert g == pytest.approx(1.0 - np.sqrt(2.0))

    def test_coincident_centre_vanishes(self):
        x = np.linspace(-2, 2, 7)
        assert np.all(mq_shifted_basis((0.3, 0.1), (0.3, 0.1), 0.7, x, x[::-1]) == 0)
        assert np.all(mq_derivatives((0.3, 0.1), (0.3, 0.1), 0.7, x, x[::-1]) == 0)

    def test_mirror_symmetry(self):
        x, y = 0.4, 0.9
        a = mq_shifted_basis((1.0, 0.5), (0.2, -0.3), 0.8, x, y)
        b = mq_shifted_basis((1.0, -0.5), (0.2, 0.3), 0.8, x, -y)
        assert a == pytest.approx(b, rel=1e-15)

    def test_first_derivative_example(self):
        d = mq_derivatives((1.0, 0.0), (0.0, 0.0), 1.0, 0.0, 0.0, order=(1, 0))
        assert d == pytest.approx(-1.0 / np.sqrt(2.0))

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1),
           st.floats(0.3, 2.0), st.sampled_from(DERIVATIVE_ORDERS), st.booleans())
    def test_finite_difference_agreement(self, xi, yi, x, y, c, order, along_x):
        # one central difference (step 1e-5 c) of the next-lower analytic partial
        s, t = order
        if s == 0 or (t > 0 and not along_x):
            lower, step = (s, t - 1), np.array([0.0, 1.0])
        else:
            lower, step = (s - 1, t), np.array([1.0, 0.0])
        h = 1e-5 * c

        def g(p):
            if lower == (0, 0):
                return mq_shifted_basis((xi, yi), (0.1, -0.2), c, *p)
            return mq_derivatives((xi, yi), (0.1, -0.2), c, *p, order=lower)

        p = np.array([x, y])
        fd = (g(p + h * step) - g(p - h * step)) / (2 * h)
        exact = mq_derivatives((xi, yi), (0.1, -0.2), c, x, y, order=order)
        # derivatives of order k scale like c**(1 - k)
        scale = max(abs(exact), 1e-3 * c ** (1 - s - t))
        assert abs(fd - exact) <= 1e-6 * scale

    def test_partials_match_single_kernel(self):
        # MultiQuadric.partials are those of sqrt(r^2 + c^2) itself
        c = 0.6
        fun = lambda a, b: MultiQuadric.value(a, b, c)  # noqa: E731
        p = MultiQuadric.partials(0.3, -0.7, c)
        for k, order in enumerate(DERIVATIVE_ORDERS):
            assert p[k] == pytest.approx(_fd_partial(fun, 0.3, -0.7, *order, 1e-3), rel=1e-5, abs=1e-9)


class TestEnclosingCircle:
    def test_square(self):
        ctr, rad = minimal_enclosing_circle([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]])
        np.testing.assert_allclose(ctr, [0.5, 0.5])
        assert rad == pytest.approx(np.sqrt(0.5))

    def test_obtuse_triangle_uses_longest_side(self):
        ctr, rad = minimal_enclosing_circle([[0, 0], [4, 0], [2, 0.5]])
        np.testing.assert_allclose(ctr, [2, 0])
        assert rad == pytest.approx(2.0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 25), st.integers(0, 10**6))
    def test_encloses_all(self, n, seed):
        pts = np.random.default_rng(seed).normal(size=(n, 2))
        ctr, rad = minimal_enclosing_circle(pts)
        assert np.all(np.linalg.norm(pts - ctr, axis=1) <= rad * (1 + 1e-9))

    def test_params(self):
        p = RBFParams(np.sqrt(10.0), 2.0)
        assert p.c == np.sqrt(10.0) * 2.0
        with pytest.raises(ValueError):
            RBFParams(0.0, 1.0)


class TestWeights:
    def test_shape_and_row_sums(self):
        w = _weights(LATTICE * 1e-6)
        assert w.weights.shape == (9, 13)
        assert w.m == 12
        W = w.weights
        assert np.all(np.abs(w.row_sums()) <= 1e-9 * np.abs(W).max(axis=1))

    def test_basis_exactness(self):
        X = LATTICE * 0.37e-6 + [2e-6, 5e-6]
        w = _weights(X)
        c = w.params.c
        for j in range(1, len(X)):
            vals = mq_shifted_basis(X[j], X[0], c, X[:, 0], X[:, 1])
            exact = mq_derivatives(X[j], X[0], c, X[0, 0], X[0, 1])
            got = w.weights @ vals
            np.testing.assert_allclose(got, exact, rtol=1e-9, atol=1e-9 * np.abs(exact).max())

    def test_translation_invariance(self):
        # dyadic spacing and shift keep the translated offsets exact
        h = 2.0 ** -20
        a = _weights(LATTICE * h).weights
        b = _weights(LATTICE * h + [37 * 2.0 ** -20, -12 * 2.0 ** -20]).weights
        np.testing.assert_allclose(b, a, rtol=0, atol=1e-12 * np.abs(a).max())

    def test_translation_generic_shift(self):
        # an arbitrary shift rounds the offsets (~1e-15 relative), which the
        # third-derivative rows amplify; the weights still agree closely
        a = _weights(LATTICE * 1e-6).weights
        b = _weights(LATTICE * 1e-6 + [3.7e-5, -1.2e-5]).weights
        np.testing.assert_allclose(b, a, rtol=0, atol=1e-8 * np.abs(a).max())

    def test_linear_field_first_derivatives(self):
        X = LATTICE * 1e-6
        d = _weights(X).weights @ (3.0 * X[:, 0] - 2.0 * X[:, 1])
        assert d[0] == pytest.approx(3.0, rel=1e-2)
        assert d[1] == pytest.approx(-2.0, rel=1e-2)

    def test_exponential_field(self):
        h = 0.025
        X = LATTICE * h
        p = np.array([0.6, 0.35])  # off-support source
        r = np.linalg.norm(X - p, axis=1)
        w = _weights(X).weights
        d = w @ np.exp(-10 * r)
        r0 = np.linalg.norm(p)
        grad = -10 * np.exp(-10 * r0) * (X[0] - p) / r0
        assert np.linalg.norm(d[:2] - grad) <= 1e-3 * np.linalg.norm(grad)
        fun = lambda a, b: np.exp(-10 * np.hypot(a - p[0], b - p[1]))  # noqa: E731
        for k, order in enumerate(DERIVATIVE_ORDERS[2:], start=2):
            exact = _fd_partial(fun, 0.0, 0.0, *order, 1e-3)
            scale = max(abs(exact), 10.0 ** sum(order) * np.exp(-10 * r0) * 0.1)
            assert abs(d[k] - exact) <= 1e-1 * scale

    def test_too_few_points(self):
        with pytest.raises(ValueError, match="too small"):
            _weights(LATTICE[:8])

    def test_duplicate_points(self):
        X = np.vstack([LATTICE, LATTICE[3]])
        with pytest.raises(ValueError, match="distinct"):
            _weights(X)

    def test_ill_conditioned_support(self):
        with pytest.raises(IllConditionedSupport, match="c0"):
            _weights(LATTICE, c0=1e5)
