import warnings

import numpy as np
import pytest

from dynmap.errors import ConfigError, DegenerateConfigurationError, DomainError
from dynmap.static import (
    CMDSWarning,
    PerplexityWarning,
    cmds,
    fit_disparities,
    mds_gradient,
    mds_stress,
    pava,
    sammon_cost,
    sammon_gradient,
    stress_value_and_grad,
    tsne_conditional_p,
    tsne_cost,
    tsne_gradient,
    tsne_p_matrix,
)
from helpers import central_differences, euclidean, monotone_lsq_bruteforce, relative_error


class TestCMDS:
    def test_collinear_points(self):
        pos = np.array([0.0, 1.0, 3.0])
        D = np.abs(pos[:, None] - pos[None])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CMDSWarning)
            X = cmds(D, 2)
        assert np.allclose(euclidean(X[:, :1]), D, atol=1e-12)
        assert np.allclose(X[:, 1], 0.0, atol=1e-12)

    def test_rank_deficient_warns(self):
        pos = np.array([0.0, 1.0, 3.0])
        with pytest.warns(CMDSWarning):
            cmds(np.abs(pos[:, None] - pos[None]), 2)

    def test_zero_matrix(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CMDSWarning)
            assert np.array_equal(cmds(np.zeros((4, 4)), 2), np.zeros((4, 2)))

    def test_four_random_points(self, rng):
        D = euclidean(rng.standard_normal((4, 2)))
        assert np.max(np.abs(euclidean(cmds(D, 2)) - D)) < 1e-8

    def test_sign_convention_is_deterministic(self, rng):
        D = euclidean(rng.standard_normal((6, 2)))
        X = cmds(D, 2)
        pivot = np.argmax(np.abs(X), axis=0)
        assert np.all(X[pivot, [0, 1]] > 0)

    def test_too_many_dimensions(self):
        with pytest.raises(ConfigError):
            cmds(np.zeros((3, 3)), 3)


class TestPAVA:
    def test_monotone_unchanged(self):
        y = np.array([1.0, 2.0, 2.0, 5.0])
        assert np.array_equal(pava(y), y)

    def test_pair(self):
        assert np.array_equal(pava(np.array([3.0, 1.0])), [2.0, 2.0])

    def test_hand_case(self):
        assert np.allclose(pava(np.array([1.0, 3.0, 2.0, 4.0])), [1, 2.5, 2.5, 4], atol=1e-15)

    def test_weighted_against_oracle(self, rng):
        y, w = rng.standard_normal(6), rng.uniform(0.5, 2, 6)
        assert np.allclose(pava(y, w), monotone_lsq_bruteforce(y, w), atol=1e-12)

    def test_rejects_nonpositive_weights(self):
        with pytest.raises(ConfigError):
            pava(np.ones(3), np.array([1.0, 0.0, 1.0]))


class TestDisparities:
    def test_ratio_proportional(self, rng):
        D = euclidean(rng.standard_normal((5, 2)))
        dhat = fit_disparities(euclidean(rng.standard_normal((5, 2))), D, "ratio")
        ratio = dhat[~np.eye(5, dtype=bool)] / D[~np.eye(5, dtype=bool)]
        assert np.allclose(ratio, ratio[0])

    def test_normalized_to_pair_count(self, rng):
        D = euclidean(rng.standard_normal((6, 2)))
        for kind in ("ratio", "interval", "ordinal"):
            dhat = fit_disparities(euclidean(rng.standard_normal((6, 2))), D, kind)
            assert np.sum(np.triu(dhat, 1) ** 2) == pytest.approx(15.0)

    def test_ordinal_monotone_in_rank(self, rng):
        D = euclidean(rng.standard_normal((7, 2)))
        dhat = fit_disparities(euclidean(rng.standard_normal((7, 2))), D, "ordinal")
        iu = np.triu_indices(7, 1)
        order = np.argsort(D[iu], kind="stable")
        assert np.all(np.diff(dhat[iu][order]) >= -1e-12)

    def test_ordinal_three_pairs_pool(self):
        # pairs ranked 1, 2, 3 by dissimilarity with map distances 2, 1, 3
        D = np.zeros((3, 3))
        dist = np.zeros((3, 3))
        for (i, j), delta, dd in zip([(0, 1), (0, 2), (1, 2)], [1.0, 2.0, 3.0], [2.0, 1.0, 3.0]):
            D[i, j] = D[j, i] = delta
            dist[i, j] = dist[j, i] = dd
        dhat = fit_disparities(dist, D, "ordinal")
        raw = np.array([dhat[0, 1], dhat[0, 2], dhat[1, 2]])
        expected = np.array([1.5, 1.5, 3.0])
        assert np.allclose(raw / raw[2], expected / 3.0)
        assert np.sum(raw ** 2) == pytest.approx(3.0)

    def test_interval_nonnegative(self, rng):
        D = euclidean(rng.standard_normal((6, 2)))
        dist = np.max(D) - D
        np.fill_diagonal(dist, 0)
        assert np.all(fit_disparities(dist, D, "interval") >= 0)

    def test_unknown_type(self):
        with pytest.raises(ConfigError):
            fit_disparities(np.zeros((2, 2)), np.zeros((2, 2)), "cardinal")


class TestStress:
    def test_perfect_embedding(self, rng):
        X = rng.standard_normal((5, 2))
        assert mds_stress(X, 3.0 * euclidean(X), "ratio")[0] == pytest.approx(0.0, abs=1e-12)

    def test_bounds(self, rng):
        for _ in range(10):
            X = rng.standard_normal((6, 2))
            D = euclidean(rng.standard_normal((6, 3)))
            for kind in ("ratio", "ordinal"):
                assert 0.0 <= mds_stress(X, D, kind)[0] <= 1.0

    def test_gradient_at_fixed_disparities(self, rng):
        X = rng.standard_normal((6, 2))
        D = euclidean(rng.standard_normal((6, 3)))
        dhat = fit_disparities(euclidean(X), D, "ratio")
        g = stress_value_and_grad(X, dhat)[1]
        fd = central_differences(lambda Y: stress_value_and_grad(Y, dhat, compute_grad=False)[0], X)
        assert relative_error(g, fd) < 1e-5

    def test_translation_orthogonal(self, rng):
        X = rng.standard_normal((6, 2))
        g = mds_gradient(X, euclidean(rng.standard_normal((6, 2))), "ratio")
        assert np.allclose(g.sum(axis=0), 0.0, atol=1e-12)

    def test_zero_at_perfect_fit(self, rng):
        X = rng.standard_normal((5, 2))
        assert np.allclose(mds_gradient(X, euclidean(X), "ratio"), 0.0, atol=1e-10)

    def test_rigid_motion_invariance(self, rng):
        X = rng.standard_normal((6, 2))
        D = euclidean(rng.standard_normal((6, 2)))
        Q, _ = np.linalg.qr(rng.standard_normal((2, 2)))
        for kind in ("ratio", "interval", "ordinal"):
            a = mds_stress(X, D, kind)[0]
            b = mds_stress(X @ Q + 3.0, D, kind)[0]
            assert a == pytest.approx(b, abs=1e-12)

    def test_degenerate_configuration(self):
        with pytest.raises(DegenerateConfigurationError):
            mds_stress(np.zeros((3, 2)), np.ones((3, 3)) - np.eye(3))


class TestSammon:
    def test_perfect(self, rng):
        X = rng.standard_normal((5, 2))
        assert sammon_cost(X, euclidean(X)) == pytest.approx(0.0, abs=1e-15)

    def test_gradient(self, rng):
        X = rng.standard_normal((5, 2))
        D = euclidean(rng.standard_normal((5, 2)))
        fd = central_differences(lambda Y: sammon_cost(Y, D), X)
        assert relative_error(sammon_gradient(X, D), fd) < 1e-5

    def test_joint_scaling(self, rng):
        X = rng.standard_normal((5, 2))
        D = euclidean(rng.standard_normal((5, 2)))
        assert sammon_cost(4.0 * X, 4.0 * D) == pytest.approx(sammon_cost(X, D), rel=1e-12)

    def test_requires_positive(self):
        D = np.array([[0, 0, 1.0], [0, 0, 1.0], [1.0, 1.0, 0]])
        with pytest.raises(DomainError):
            sammon_cost(np.eye(3)[:, :2], D)


class TestTSNE:
    def test_rows_sum_to_one(self, rng):
        Pc = tsne_conditional_p(euclidean(rng.standard_normal((8, 2))), 3.0)
        assert np.allclose(Pc.sum(axis=1), 1.0)

    def test_joint_symmetric_unit_mass(self, rng):
        P = tsne_p_matrix(euclidean(rng.standard_normal((8, 2))), 3.0)
        assert np.allclose(P, P.T) and P.sum() == pytest.approx(1.0)

    def test_equidistant_uniform(self):
        D = np.ones((3, 3)) - np.eye(3)
        for perplexity in (0.5, 1.5, 2.5):
            # every bandwidth gives the same row, so the search cannot hit the target
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", PerplexityWarning)
                P = tsne_p_matrix(D, perplexity)
            off = P[~np.eye(3, dtype=bool)]
            assert np.allclose(off, 1 / 6)

    def test_kl_zero_when_matched(self, rng):
        X = rng.standard_normal((6, 2))
        num = 1.0 / (1.0 + euclidean(X) ** 2)
        np.fill_diagonal(num, 0.0)
        Q = num / num.sum()
        assert tsne_cost(X, Q) == pytest.approx(0.0, abs=1e-12)

    def test_kl_nonnegative(self, rng):
        for _ in range(10):
            P = tsne_p_matrix(euclidean(rng.standard_normal((7, 2))), 2.5)
            assert tsne_cost(rng.standard_normal((7, 2)), P) >= 0.0

    def test_gradient(self, rng):
        P = tsne_p_matrix(euclidean(rng.standard_normal((6, 2))), 2.0)
        X = rng.standard_normal((6, 2))
        fd = central_differences(lambda Y: tsne_cost(Y, P), X)
        assert relative_error(tsne_gradient(X, P), fd) < 1e-4

    def test_perplexity_range(self):
        with pytest.raises(ConfigError):
            tsne_conditional_p(np.ones((3, 3)) - np.eye(3), 3.0)
