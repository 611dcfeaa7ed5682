"""Proximal operators against brute-force 1-D minimizers.

Each closed-form operator is checked two ways: against a fine-grid search
over the scalar objective it claims to minimize (frozen random instances),
and with hypothesis properties that must hold for every input.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnbcd.errors import BetaOutOfRange, NonPositiveGamma
from nnbcd.prox import (
    hard_threshold,
    project_topk,
    prox_hinge,
    prox_leaky_relu,
    prox_relu,
    soft_threshold,
)

finite = st.floats(-5, 5, allow_nan=False)
weight = st.floats(0.05, 20, allow_nan=False)


def relu_obj(u, a, g, b):
    return 0.5 * (np.maximum(u, 0.0) - a) ** 2 + 0.5 * g * (u - b) ** 2


def hinge_obj(u, a, g, b):
    return np.maximum(0.0, 1.0 - a * u) + 0.5 * g * (u - b) ** 2


def l1_obj(u, z, t):
    return 0.5 * (u - z) ** 2 + t * np.abs(u)


def grid_min(f, lo=-6.0, hi=6.0, step=1e-4):
    u = np.arange(lo, hi, step)
    vals = f(u)
    return u[np.argmin(vals)], vals.min()


class TestProxRelu:
    def test_grid_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            a, b = rng.uniform(-4, 4, 2)
            g = rng.uniform(0.05, 10)
            u = prox_relu(a, b, g)
            _, best = grid_min(lambda t: relu_obj(t, a, g, b))
            assert relu_obj(u, a, g, b) <= best + 1e-6

    def test_known_values(self):
        # interior smooth branch: a + g*b >= 0 with b >= 0
        assert prox_relu(2.0, 1.0, 1.0) == pytest.approx(1.5)
        # fully negative pull: u = min(b, 0)
        assert prox_relu(-3.0, -1.0, 1.0) == pytest.approx(-1.0)

    @given(a=finite, b=finite, g=weight)
    @settings(max_examples=200, deadline=None)
    def test_beats_neighbors(self, a, b, g):
        u = prox_relu(a, b, g)
        f0 = relu_obj(u, a, g, b)
        for eps in (1e-3, -1e-3, 0.1, -0.1):
            assert f0 <= relu_obj(u + eps, a, g, b) + 1e-9

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(0)
        a, b = rng.standard_normal((2, 50))
        out = prox_relu(a, b, 2.5)
        for j in range(50):
            assert out[j] == prox_relu(float(a[j]), float(b[j]), 2.5)

    def test_rejects_nonpositive_weight(self):
        with pytest.raises(NonPositiveGamma):
            prox_relu(1.0, 1.0, 0.0)


class TestProxLeakyRelu:
    def test_grid_oracle(self):
        rng = np.random.default_rng(11)

        def obj(u, a, g, b, s):
            return 0.5 * (np.maximum(u, s * u) - a) ** 2 + 0.5 * g * (u - b) ** 2

        for _ in range(200):
            a, b = rng.uniform(-4, 4, 2)
            g = rng.uniform(0.05, 10)
            s = rng.uniform(0.01, 0.9)
            u = prox_leaky_relu(a, b, g, s)
            _, best = grid_min(lambda t: obj(t, a, g, b, s))
            assert obj(u, a, g, b, s) <= best + 1e-6

    def test_reduces_to_identity_prox_for_slope_near_one(self):
        # as slope -> 1 the activation is linear and the prox is the blend
        u = prox_leaky_relu(2.0, 1.0, 1.0, 0.999)
        assert u == pytest.approx((2.0 + 1.0) / 2.0, abs=5e-3)


class TestProxHinge:
    def test_grid_oracle(self):
        rng = np.random.default_rng(13)
        for _ in range(300):
            a = rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 3)
            b = rng.uniform(-4, 4)
            g = rng.uniform(0.05, 10)
            u = prox_hinge(a, b, g)
            _, best = grid_min(lambda t: hinge_obj(t, a, g, b))
            assert hinge_obj(u, a, g, b) <= best + 1e-6

    def test_four_branches(self):
        # a = 0: quadratic only
        assert prox_hinge(0.0, 2.0, 1.0) == 2.0
        # deep in the hinge: shift by a/g
        assert prox_hinge(1.0, -3.0, 1.0) == pytest.approx(-2.0)
        # kink capture: u = 1/a
        assert prox_hinge(2.0, 0.3, 10.0) == pytest.approx(0.5)
        # already past the margin: untouched
        assert prox_hinge(1.0, 5.0, 1.0) == 5.0

    @given(a=finite, b=finite, g=weight)
    @settings(max_examples=200, deadline=None)
    def test_beats_neighbors(self, a, b, g):
        u = prox_hinge(a, b, g)
        f0 = hinge_obj(u, a, g, b)
        for eps in (1e-3, -1e-3, 0.25, -0.25):
            assert f0 <= hinge_obj(u + eps, a, g, b) + 1e-9


class TestThresholds:
    def test_soft_grid_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            z = rng.uniform(-4, 4)
            t = rng.uniform(0, 3)
            u = soft_threshold(z, t)
            _, best = grid_min(lambda s: l1_obj(s, z, t))
            assert l1_obj(u, z, t) <= best + 1e-6

    def test_soft_shrinks_toward_zero(self):
        z = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
        np.testing.assert_allclose(soft_threshold(z, 1.0),
                                   [-1.0, 0.0, 0.0, 0.0, 1.0])

    def test_hard_keeps_or_kills(self):
        z = np.array([-2.0, -1.0, 0.5, 1.0, 3.0])
        out = hard_threshold(z, 1.0)
        np.testing.assert_array_equal(out, [-2.0, 0.0, 0.0, 0.0, 3.0])

    def test_hard_boundary_goes_to_zero(self):
        assert hard_threshold(1.0, 1.0) == 0.0
        assert hard_threshold(-1.0, 1.0) == 0.0

    @given(st.lists(finite, min_size=1, max_size=30), st.floats(0, 3))
    @settings(max_examples=100, deadline=None)
    def test_soft_is_nonexpansive(self, zs, t):
        z = np.array(zs)
        out = soft_threshold(z, t)
        assert np.all(np.abs(out) <= np.abs(z) + 1e-12)
        assert np.all(np.sign(out) * np.sign(z) >= 0)

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            soft_threshold(1.0, -0.5)
        with pytest.raises(ValueError):
            hard_threshold(1.0, -0.5)


class TestProjectTopk:
    def test_keeps_largest_magnitudes(self):
        z = np.array([0.1, -5.0, 2.0, -0.3])
        np.testing.assert_array_equal(project_topk(z, 2), [0.0, -5.0, 2.0, 0.0])

    def test_ties_go_to_lowest_index(self):
        z = np.array([1.0, -1.0, 1.0])
        np.testing.assert_array_equal(project_topk(z, 1), [1.0, 0.0, 0.0])
        np.testing.assert_array_equal(project_topk(z, 2), [1.0, -1.0, 0.0])

    def test_matrix_shape_preserved(self):
        rng = np.random.default_rng(5)
        z = rng.standard_normal((6, 7))
        out = project_topk(z, 10)
        assert out.shape == z.shape
        assert np.count_nonzero(out) <= 10

    def test_beta_bounds(self):
        with pytest.raises(BetaOutOfRange):
            project_topk(np.ones(4), 0)
        with pytest.raises(BetaOutOfRange):
            project_topk(np.ones(4), 5)

    @given(st.lists(finite, min_size=1, max_size=20), st.data())
    @settings(max_examples=100, deadline=None)
    def test_is_euclidean_projection(self, zs, data):
        z = np.array(zs)
        beta = data.draw(st.integers(1, len(zs)))
        out = project_topk(z, beta)
        assert np.count_nonzero(out) <= beta
        # the squared distance to z equals the energy of the discarded
        # smallest-magnitude coordinates — the defining property of the
        # projection onto the sparsity ball
        discarded = np.sort(np.abs(z))[: len(zs) - beta]
        assert np.sum((z - out) ** 2) == pytest.approx(np.sum(discarded**2), abs=1e-9)
