"""Compressed-weight updates: exactness oracles and constraint bookkeeping."""

from itertools import combinations

import numpy as np
import pytest

from nnbcd.compress import (
    CompressionSpec,
    compressed_param_count,
    compression_ratio,
    constraint_violation,
    project,
    sparsity,
    update_mc,
)
from nnbcd.errors import BetaOutOfRange, InvalidRankChain
from nnbcd.model import Hyperparams
from nnbcd.tt import Tensorization, tt_param_count, tt_reconstruct


HP = Hyperparams(gamma=5, rho=5, tau=0.1, alpha=1, lambda_reg=0.02)


def mc_objective(m, w, m_prev, hp, reg):
    val = 0.5 * hp.tau * np.sum((w - m) ** 2) + 0.5 * hp.alpha * np.sum((m - m_prev) ** 2)
    return val + reg(m)


class TestTopkOracle:
    def test_exhaustive_enumeration(self):
        """The top-k blend update must beat every fixed-support candidate.

        For a fixed support S the unconstrained minimizer restricted to S is
        the blend z on S and zero elsewhere, so enumerating all supports of
        size beta is an exact oracle.
        """
        rng = np.random.default_rng(21)
        hp = Hyperparams(1, 1, 0.7, 0.3)
        for _ in range(200):
            n = rng.integers(2, 13)
            beta = int(rng.integers(1, n + 1))
            w = rng.standard_normal(n)
            m_prev = rng.standard_normal(n)
            spec = CompressionSpec("l0_constrained", beta=beta)
            got, _ = update_mc(w[None, :], m_prev[None, :], None, spec, hp)
            got = got[0]
            z = (hp.tau * w + hp.alpha * m_prev) / (hp.tau + hp.alpha)
            best = np.inf
            for sup in combinations(range(n), beta):
                cand = np.zeros(n)
                cand[list(sup)] = z[list(sup)]
                best = min(best, mc_objective(cand, w, m_prev, hp, lambda m: 0.0))
            assert mc_objective(got, w, m_prev, hp, lambda m: 0.0) <= best + 1e-10

    def test_support_size_exact(self):
        rng = np.random.default_rng(22)
        w = rng.standard_normal((10, 10))
        spec = CompressionSpec("l0_constrained", beta=17)
        got, native = update_mc(w, np.zeros_like(w), None, spec, HP)
        assert native is None
        assert np.count_nonzero(got) == 17


class TestThresholdUpdates:
    def test_l1_three_point_dominance(self):
        # the closed-form soft threshold of the blend must not be beaten by
        # the blend itself, zero, or the uncompressed weight
        rng = np.random.default_rng(23)
        w = rng.standard_normal((6, 4))
        m_prev = rng.standard_normal((6, 4))
        spec = CompressionSpec("l1_reg")
        got, _ = update_mc(w, m_prev, None, spec, HP)

        def reg(m):
            return HP.lambda_reg * np.sum(np.abs(m))

        z = (HP.tau * w + HP.alpha * m_prev) / (HP.tau + HP.alpha)
        f = mc_objective(got, w, m_prev, HP, reg)
        for cand in (z, np.zeros_like(w), w, m_prev):
            assert f <= mc_objective(cand, w, m_prev, HP, reg) + 1e-12

    def test_l0_reg_threshold_value(self):
        # entries of the blend survive exactly when |z| > sqrt(2*lam/(tau+alpha))
        hp = Hyperparams(1, 1, 0.5, 0.5, lambda_reg=0.25)
        t = np.sqrt(2 * 0.25 / 1.0)
        z = np.array([[t * 0.99, t * 1.01, -t * 2.0, 0.0]])
        spec = CompressionSpec("l0_reg")
        got, _ = update_mc(z, z, None, spec, hp)  # blend of equal halves is z
        np.testing.assert_array_equal(got, [[0.0, t * 1.01, -t * 2.0, 0.0]])

    def test_none_kind_blends(self):
        w = np.full((2, 2), 2.0)
        m_prev = np.zeros((2, 2))
        got, _ = update_mc(w, m_prev, None, None, Hyperparams(1, 1, 3.0, 1.0))
        np.testing.assert_allclose(got, 1.5)  # (3*2 + 1*0) / 4


class TestTTUpdate:
    def test_update_keeps_rank_constraint(self):
        rng = np.random.default_rng(24)
        t = Tensorization((4, 4), (4, 4))
        spec = CompressionSpec("tt", tensorization=t, ranks=(1, 3, 1))
        w = rng.standard_normal((16, 16))
        dense0, native0 = project(w, spec)
        dense, native = update_mc(w, dense0, native0, spec, HP)
        assert constraint_violation(dense, native, spec) is None
        np.testing.assert_allclose(dense, tt_reconstruct(native), atol=1e-12)

    def test_projection_alpha_zero_is_plain_tt_svd(self):
        rng = np.random.default_rng(25)
        t = Tensorization((2, 2), (2, 2))
        spec = CompressionSpec("tt", tensorization=t, ranks=(1, 4, 1))
        w = rng.standard_normal((4, 4))
        dense, _ = project(w, spec)
        np.testing.assert_allclose(dense, w, atol=1e-10)  # max rank is exact

    def test_spec_requires_tensorization(self):
        with pytest.raises(InvalidRankChain):
            CompressionSpec("tt")


class TestConstraintViolation:
    def test_l0_flags_excess_support(self):
        spec = CompressionSpec("l0_constrained", beta=2)
        assert constraint_violation(np.ones((1, 3)), None, spec) is not None
        assert constraint_violation(np.array([[1.0, 0.0, 2.0]]), None, spec) is None

    def test_none_and_reg_are_unconstrained(self):
        assert constraint_violation(np.ones((2, 2)), None, None) is None
        assert constraint_violation(np.ones((2, 2)), None, CompressionSpec("l1_reg")) is None

    def test_tt_flags_missing_cores(self):
        t = Tensorization((2, 2), (2, 2))
        spec = CompressionSpec("tt", tensorization=t, ranks=(1, 2, 1))
        assert constraint_violation(np.ones((4, 4)), None, spec) is not None


class TestMetrics:
    def test_param_counts(self):
        assert compressed_param_count(None, (10, 20)) == 200
        assert compressed_param_count(CompressionSpec("l0_constrained", beta=7),
                                      (10, 20)) == 7
        t = Tensorization((2, 5), (4, 5))
        spec = CompressionSpec("tt", tensorization=t, ranks=(1, 2, 1))
        assert compressed_param_count(spec, (10, 20)) == 1 * 2 * 4 * 2 + 2 * 5 * 5 * 1

    def test_compression_ratio(self):
        specs = [CompressionSpec("l0_constrained", beta=10), None]
        shapes = [(10, 10), (5, 2)]
        assert compression_ratio(specs, shapes) == pytest.approx(20 / 110)

    def test_sparsity(self):
        mats = [np.array([[1.0, 0.0], [0.0, 0.0]]), np.zeros((2, 2))]
        assert sparsity(mats) == pytest.approx(7 / 8)

    def test_beta_validation(self):
        with pytest.raises(BetaOutOfRange):
            CompressionSpec("l0_constrained", beta=0)
        spec = CompressionSpec("l0_constrained", beta=100)
        with pytest.raises(BetaOutOfRange):
            spec.validate_shape((3, 3))
