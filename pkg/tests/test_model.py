"""Network specification, state handling, and the penalized objective."""

import numpy as np
import pytest

from nnbcd.errors import ShapeMismatch, UnsupportedActivation
from nnbcd.model import (
    Activation,
    Hyperparams,
    NetworkSpec,
    empirical_risk,
    forward,
    init_state,
    objective,
)


def tiny_spec(loss="squared", use_bias=False):
    return NetworkSpec((3, 5, 2),
                       (Activation("relu"), Activation("identity")),
                       loss=loss, use_bias=use_bias)


class TestActivation:
    def test_relu(self):
        np.testing.assert_array_equal(
            Activation("relu").apply(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])

    def test_leaky(self):
        np.testing.assert_allclose(
            Activation("leaky_relu", 0.1).apply(np.array([-2.0, 3.0])), [-0.2, 3.0])

    def test_rejects_unknown(self):
        with pytest.raises(UnsupportedActivation):
            Activation("tanh")

    def test_rejects_bad_slope(self):
        with pytest.raises(UnsupportedActivation):
            Activation("leaky_relu", 1.5)


class TestHyperparams:
    def test_all_positive_required(self):
        for key in ("gamma", "rho", "tau", "alpha"):
            kwargs = dict(gamma=1, rho=1, tau=1, alpha=1)
            kwargs[key] = 0
            with pytest.raises(ValueError, match=key):
                Hyperparams(**kwargs)

    def test_negative_reg_rejected(self):
        with pytest.raises(ValueError):
            Hyperparams(1, 1, 1, 1, lambda_reg=-0.1)


class TestNetworkSpec:
    def test_weight_shapes(self):
        spec = tiny_spec()
        assert spec.n_layers == 2
        assert spec.weight_shape(1) == (5, 3)
        assert spec.weight_shape(2) == (2, 5)

    def test_output_activation_must_be_identity(self):
        with pytest.raises(UnsupportedActivation):
            NetworkSpec((3, 2), (Activation("relu"),))

    def test_activation_count_checked(self):
        with pytest.raises(ShapeMismatch):
            NetworkSpec((3, 5, 2), (Activation("identity"),))


class TestForwardAndRisk:
    def test_forward_matches_manual(self):
        rng = np.random.default_rng(0)
        spec = tiny_spec()
        w = [rng.standard_normal(spec.weight_shape(i)) for i in (1, 2)]
        x = rng.standard_normal((3, 7))
        expected = w[1] @ np.maximum(w[0] @ x, 0.0)
        np.testing.assert_allclose(forward(spec, w, x), expected)

    def test_forward_with_bias(self):
        spec = tiny_spec(use_bias=True)
        w = [np.zeros((5, 3)), np.zeros((2, 5))]
        b = [np.arange(5.0), np.array([1.0, -1.0])]
        out = forward(spec, w, np.zeros((3, 4)), b)
        np.testing.assert_array_equal(out, np.tile([[1.0], [-1.0]], (1, 4)))

    def test_squared_risk_scaling(self):
        # ||v - y||^2 summed, divided by n — no extra 1/2
        spec = tiny_spec()
        v = np.array([[1.0, 0.0], [0.0, 1.0]])
        y = np.zeros((2, 2))
        assert empirical_risk(spec, v, y) == pytest.approx(1.0)

    def test_hinge_risk(self):
        spec = NetworkSpec((3, 1), (Activation("identity"),), loss="hinge")
        v = np.array([[0.5, -2.0, 3.0]])
        y = np.array([[1.0, -1.0, 1.0]])
        # margins 0.5, -2: losses 0.5, 0, 0 -> mean over n=3
        assert empirical_risk(spec, v, y) == pytest.approx(0.5 / 3)


class TestObjective:
    def test_matches_manual_sum(self):
        rng = np.random.default_rng(1)
        spec = tiny_spec()
        hp = Hyperparams(gamma=2.0, rho=3.0, tau=0.5, alpha=1.0)
        x = rng.standard_normal((3, 10))
        y = rng.standard_normal((2, 10))
        state = init_state(spec, x, seed=4)
        # perturb so no residual vanishes
        for blk in state.u + state.v[1:] + state.w_mc:
            blk += 0.1 * rng.standard_normal(blk.shape)
        br = objective(spec, state, y, hp, check_feasibility=False)
        manual = np.sum((state.v[2] - y) ** 2) / 10
        for i in (0, 1):
            manual += 0.5 * hp.rho * np.sum((state.u[i] - state.w[i] @ state.v[i]) ** 2)
            sig = spec.activations[i].apply(state.u[i])
            manual += 0.5 * hp.gamma * np.sum((state.v[i + 1] - sig) ** 2)
            manual += 0.5 * hp.tau * np.sum((state.w[i] - state.w_mc[i]) ** 2)
        assert br.total == pytest.approx(manual, rel=1e-12)

    def test_zero_at_consistent_state(self):
        # a state produced by a plain forward pass with w_mc == w has zero
        # coupling residuals; only the data term remains
        spec = tiny_spec()
        hp = Hyperparams(5, 5, 0.1, 1)
        rng = np.random.default_rng(2)
        x = rng.standard_normal((3, 6))
        state = init_state(spec, x, seed=0)
        y = state.v[2].copy()
        br = objective(spec, state, y, hp)
        assert br.coupling_rho == 0 and br.coupling_gamma == 0 and br.mc_tau == 0
        assert br.risk == 0


class TestInitState:
    def test_deterministic(self):
        spec = tiny_spec()
        x = np.random.default_rng(3).standard_normal((3, 8))
        s1, s2 = init_state(spec, x, seed=9), init_state(spec, x, seed=9)
        for a, b in zip(s1.blocks(), s2.blocks()):
            np.testing.assert_array_equal(a, b)

    def test_gaussian_scale(self):
        spec = NetworkSpec((50, 80), (Activation("identity"),))
        state = init_state(spec, np.zeros((50, 2)), seed=0)
        assert np.std(state.w[0]) == pytest.approx(0.01, rel=0.1)

    def test_zero_scheme_fixed_point_shape(self):
        spec = tiny_spec()
        state = init_state(spec, np.ones((3, 4)), seed=0, scheme="zero")
        assert all(np.all(w == 0) for w in state.w)
        assert np.all(state.v[2] == 0)

    def test_x_is_aliased_not_copied(self):
        spec = tiny_spec()
        x = np.zeros((3, 4))
        state = init_state(spec, x, seed=0)
        assert state.v[0] is not None
        assert state.copy().v[0] is state.v[0]

    def test_step_norm_counts_all_blocks(self):
        spec = tiny_spec()
        state = init_state(spec, np.ones((3, 4)), seed=1)
        other = state.copy()
        other.w[0] = other.w[0] + 1.0
        other.v[1] = other.v[1] + 2.0
        expected = state.w[0].size * 1.0 + state.v[1].size * 4.0
        assert other.step_norm_sq(state) == pytest.approx(expected)
