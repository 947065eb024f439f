import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eventshape.classifiers import (GgmModel, SvmEnsemble, couple_probabilities, ggm_fit,
                                    ggm_score, kmeans, majority_vote, memory_classify,
                                    name_clusters, purity, svm_train_binary)
from eventshape.classifiers.svm import (BinarySVM, grid_search, kernel_matrix, sigmoid_predict,
                                        sigmoid_train, smo_solve)


def blobs(rng, n=30, K=4, dim=16, spread=0.05):
    centers = rng.uniform(0, 1, (K, dim)) * 5
    X = np.concatenate([c + rng.normal(0, spread, (n, dim)) for c in centers])
    return X, np.repeat(np.arange(K), n)


def hoe_like(rng, n, V=4):
    F = rng.uniform(0, 1, (n, 4, V))
    return (F / F.sum(-1, keepdims=True)).reshape(n, -1)


def duality_gap(K, y, C, res):
    v = res.alpha * y
    quad = v @ K @ v
    f = K @ v - res.rho
    primal = 0.5 * quad + C * np.maximum(0, 1 - y * f).sum()
    dual = res.alpha.sum() - 0.5 * quad
    return primal - dual, primal


class TestKmeans:
    def test_blobs(self, rng):
        X, truth = blobs(rng)
        labels, _ = kmeans(X, 4, seed=1)
        assert purity(labels, truth) == 1.0

    def test_k1(self, rng):
        X = rng.normal(size=(20, 3))
        labels, C = kmeans(X, 1)
        assert set(labels.tolist()) == {0}
        assert np.allclose(C[0], X.mean(0))

    def test_duplicates(self, rng):
        X = rng.normal(size=(10, 3))
        X = np.concatenate([X, X])
        labels, _ = kmeans(X, 3)
        assert np.array_equal(labels[:10], labels[10:])

    def test_too_many_clusters(self):
        with pytest.raises(ValueError):
            kmeans(np.zeros((3, 2)), 4)

    def test_deterministic(self, rng):
        X, _ = blobs(rng, spread=1.0)
        a, _ = kmeans(X, 4, seed=3)
        b, _ = kmeans(X, 4, seed=3)
        assert np.array_equal(a, b)

    def test_all_identical_rows(self):
        labels, _ = kmeans(np.ones((6, 2)), 2)
        assert len(labels) == 6 and set(labels.tolist()) <= {0, 1}


class TestGgm:
    def test_score_one_at_mean(self, rng):
        F = hoe_like(rng, 40)
        m = ggm_fit(F, np.repeat([0, 1], 20), 2)
        assert np.allclose(ggm_score(m, m.means[1])[1], 1.0)

    def test_scores_in_unit_interval(self, rng):
        F = hoe_like(rng, 60)
        m = ggm_fit(F, np.arange(60) % 3, 3)
        s = m.score(hoe_like(rng, 100))
        assert np.all(s <= 1.0) and np.all(s >= 0.0)

    def test_monotone_in_distance(self, rng):
        F = hoe_like(rng, 40)
        m = ggm_fit(F, np.zeros(40, int), 1)
        target = hoe_like(rng, 1)[0]
        path = [m.means[0] + t * (target - m.means[0]) for t in np.linspace(0, 1, 8)]
        s = m.score(np.array(path))[:, 0]
        assert np.all(np.diff(s) <= 1e-12)

    def test_cluster_permutation(self, rng):
        F = hoe_like(rng, 60)
        labels = np.arange(60) % 3
        m = ggm_fit(F, labels, 3)
        perm = np.array([2, 0, 1])
        m2 = ggm_fit(F, perm[labels], 3)
        # cluster k of the first fit is cluster perm[k] of the second
        assert np.allclose(m.score(F), m2.score(F)[:, perm])

    def test_small_cluster(self, rng):
        with pytest.raises(ValueError):
            ggm_fit(hoe_like(rng, 5), [0, 0, 0, 0, 1], 2)

    def test_identical_members(self):
        f = np.tile(np.eye(4)[0], 4)
        m = ggm_fit(np.tile(f, (5, 1)), np.zeros(5, int), 1)
        assert np.allclose(m.covariances[0], 1e-12 * np.eye(4))

    def test_two_members_rank(self, rng):
        F = hoe_like(rng, 2)
        m = ggm_fit(F, [0, 0], 1)
        d = ((F.reshape(2, 4, 4) - m.means[0].reshape(4, 4)) ** 2).sum(-1)
        raw = np.cov(d, rowvar=False)
        assert np.linalg.matrix_rank(raw, tol=1e-12) <= 1
        eps = max(1e-8 * np.trace(raw) / 4, 1e-12)
        assert np.allclose(m.covariances[0], raw + eps * np.eye(4))

    def test_roundtrip(self, rng):
        F = hoe_like(rng, 30)
        m = ggm_fit(F, np.arange(30) % 2, 2)
        back = GgmModel.from_dict(m.to_dict())
        assert np.array_equal(back.score(F), m.score(F))

    def test_name_clusters(self):
        assert name_clusters([0, 0, 1, 1, 1], ["a", "b", "b", "b", "a"], 3) == ["a", "b", None]


class TestSmo:
    def test_duality_gap(self):
        rng = np.random.default_rng(0)
        for i in range(20):
            X = rng.normal(size=(40, 3))
            y = np.where(X[:, 0] + 0.5 * rng.normal(size=40) > 0, 1.0, -1.0)
            kernel = "linear" if i % 2 else "rbf"
            K = kernel_matrix(X, X, kernel, 0.5)
            res = smo_solve(K, y, 1.0, tol=1e-9)
            gap, primal = duality_gap(K, y, 1.0, res)
            assert res.converged
            assert gap <= 1e-6 * (1 + abs(primal))
            assert np.all(res.alpha >= 0) and np.all(res.alpha <= 1.0)
            assert abs(res.alpha @ y) < 1e-9

    def test_two_points(self):
        X = np.array([[1.0, 0.0], [-1.0, 0.0]])
        m = svm_train_binary(X, [1, -1], "linear", C=1e6, calibrate=False)
        assert np.allclose(m.weight_vector(), [1.0, 0.0], atol=1e-6)
        assert abs(m.b) < 1e-6

    def test_reproduces_separable_labels(self, rng):
        X = np.concatenate([rng.normal(-3, 0.5, (20, 2)), rng.normal(3, 0.5, (20, 2))])
        y = np.repeat([-1, 1], 20)
        m = svm_train_binary(X, y, "linear", C=10.0, calibrate=False)
        assert np.array_equal(m.predict(X), y)

    def test_xor(self):
        X = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], float)
        y = np.array([-1, -1, 1, 1])
        lin = svm_train_binary(X, y, "linear", C=100.0, calibrate=False)
        rbf = svm_train_binary(X, y, "rbf", C=100.0, gamma=2.0, calibrate=False)
        assert not np.array_equal(lin.predict(X), y)
        assert np.array_equal(rbf.predict(X), y)

    def test_single_class(self):
        with pytest.raises(ValueError):
            svm_train_binary(np.zeros((3, 2)), [1, 1, 1])

    def test_bad_labels(self):
        with pytest.raises(ValueError):
            svm_train_binary(np.zeros((2, 2)), [0, 1])

    def test_roundtrip(self, rng):
        X = rng.normal(size=(20, 3))
        y = np.where(X[:, 1] > 0, 1, -1)
        m = svm_train_binary(X, y)
        back = BinarySVM.from_dict(m.to_dict())
        assert np.array_equal(back.decision_function(X), m.decision_function(X))


class TestSigmoid:
    def test_monotone_and_fits(self, rng):
        dec = np.concatenate([rng.normal(-2, 1, 50), rng.normal(2, 1, 50)])
        y = np.repeat([-1, 1], 50)
        A, B = sigmoid_train(dec, y)
        assert A < 0
        p = sigmoid_predict(np.array([-3.0, 0.0, 3.0]), A, B)
        assert p[0] < 0.5 < p[2]

    def test_stable_for_large_inputs(self):
        p = sigmoid_predict(np.array([-1e4, 1e4]), 1.0, 0.0)
        assert np.all(np.isfinite(p))


def qp_oracle(r):
    """Direct KKT solve of the constrained quadratic the coupling minimises."""
    K = len(r)
    Q = np.zeros((K, K))
    for i in range(K):
        for j in range(K):
            if i != j:
                Q[i, i] += r[j, i] ** 2
                Q[i, j] = -r[j, i] * r[i, j]
    A = np.zeros((K + 1, K + 1))
    A[:K, :K] = 2 * Q
    A[:K, K] = 1
    A[K, :K] = 1
    rhs = np.zeros(K + 1)
    rhs[K] = 1
    return np.linalg.solve(A, rhs)[:K]


def random_pairwise(rng, K):
    r = np.zeros((K, K))
    for i, j in itertools.combinations(range(K), 2):
        r[i, j] = rng.uniform(0.02, 0.98)
        r[j, i] = 1 - r[i, j]
    return r


class TestCoupling:
    def test_two_classes(self):
        r = np.array([[0, 0.7], [0.3, 0]])
        assert np.allclose(couple_probabilities(r), [0.7, 0.3], atol=1e-9)

    def test_uniform(self):
        r = np.full((3, 3), 0.5)
        assert np.allclose(couple_probabilities(r), [1 / 3] * 3, atol=1e-9)

    def test_matches_qp(self, rng):
        for K in (3, 4, 6):
            r = random_pairwise(rng, K)
            assert np.allclose(couple_probabilities(r), qp_oracle(r), atol=1e-7)

    def test_batched(self, rng):
        R = np.stack([random_pairwise(rng, 4) for _ in range(5)])
        P = couple_probabilities(R)
        for r, p in zip(R, P):
            assert np.allclose(p, couple_probabilities(r))

    @settings(max_examples=50)
    @given(st.integers(2, 6), st.integers(0, 2**31))
    def test_sum_and_permutation(self, K, seed):
        rng = np.random.default_rng(seed)
        r = random_pairwise(rng, K)
        p = couple_probabilities(r)
        assert abs(p.sum() - 1) <= 1e-9 and np.all(p >= 0)
        perm = rng.permutation(K)
        q = couple_probabilities(r[np.ix_(perm, perm)])
        assert np.allclose(q, p[perm], atol=1e-8)


class TestEnsemble:
    def test_three_classes(self, rng):
        X, truth = blobs(rng, n=15, K=3, dim=4, spread=0.3)
        labels = np.array(["a", "b", "c"])[truth]
        ens = SvmEnsemble.fit(X, labels, "rbf", C=10.0)
        assert ens.predict(X) == labels.tolist()
        P = ens.predict_proba(X)
        assert np.allclose(P.sum(1), 1.0, atol=1e-9)

    def test_roundtrip(self, rng):
        X, truth = blobs(rng, n=10, K=3, dim=4, spread=0.5)
        ens = SvmEnsemble.fit(X, truth.astype(str), "linear")
        back = SvmEnsemble.from_dict(ens.to_dict())
        assert np.array_equal(back.predict_proba(X), ens.predict_proba(X))

    def test_missing_class(self, rng):
        X = rng.normal(size=(6, 2))
        with pytest.raises(ValueError, match="c"):
            SvmEnsemble.fit(X, ["a", "b"] * 3, classes=["a", "b", "c"])

    def test_grid_search(self, rng):
        X, truth = blobs(rng, n=8, K=2, dim=3, spread=0.3)
        groups = np.repeat(np.arange(8), 2)     # pairs of windows share a sample
        g = grid_search(X, truth.astype(str), groups, "rbf", Cs=[1.0, 10.0], gammas=[0.1, 1.0],
                        folds=4)
        assert g["accuracy"] == 1.0
        assert g["C"] in (1.0, 10.0) and g["gamma"] in (0.1, 1.0)
        assert grid_search(X, truth, groups, "linear", Cs=[1.0], folds=4)["gamma"] is None


class TestMemory:
    def test_alpha_one(self, rng):
        f = rng.uniform(size=(10, 4))
        P, _ = memory_classify(f, 1.0)
        assert np.array_equal(P, f)

    def test_alpha_zero(self):
        f = np.tile([0.2, 0.5, 0.3], (5, 1))
        P, _ = memory_classify(f, 0.0)
        assert np.array_equal(P[1:], f[:-1])

    def test_first_window(self, rng):
        f = rng.uniform(size=(3, 2))
        P, _ = memory_classify(f, 0.4)
        assert np.array_equal(P[0], f[0])

    def test_scaling(self, rng):
        f = rng.uniform(size=(10, 4))
        _, a = memory_classify(f, 0.75)
        _, b = memory_classify(3.5 * f, 0.75)
        assert np.array_equal(a, b)

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            memory_classify(np.ones((2, 2)), 1.5)

    def test_corrupted_window(self):
        # class 0 is clearly ahead except in one window where the scores are swapped
        f = np.array([[0.9, 0.6]] * 4 + [[0.6, 0.9]] + [[0.9, 0.6]] * 3)
        f[4] = [0.6, 0.7]
        _, memoryless = memory_classify(f, 1.0)
        _, blended = memory_classify(f, 0.75)
        assert memoryless[4] == 1
        assert blended[4] == 0
        assert set(blended.tolist()) == {0}

    def test_votes(self):
        assert majority_vote([1, 1, 2]) == 1
        assert majority_vote([1, 2]) == 1
        assert majority_vote([3, 3, 3]) == 3
        with pytest.raises(ValueError):
            majority_vote([])
