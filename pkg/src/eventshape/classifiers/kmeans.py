"""Lloyd's k-means with k-means++ seeding."""
from __future__ import annotations

import numpy as np


def _sqdist(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(-1)


def kmeans_plusplus(X: np.ndarray, K: int, rng) -> np.ndarray:
    n = len(X)
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(1)
    for _ in range(1, K):
        total = d2.sum()
        if total > 0:
            i = rng.choice(n, p=d2 / total)
        else:
            i = rng.integers(n)
        centers.append(X[i])
        d2 = np.minimum(d2, ((X - X[i]) ** 2).sum(1))
    return np.array(centers, dtype=float)


def _lloyd(X, K, rng, max_iter):
    C = kmeans_plusplus(X, K, rng)
    labels = np.full(len(X), -1)
    for _ in range(max_iter):
        d = _sqdist(X, C)
        new = d.argmin(1)
        for k in range(K):
            if not np.any(new == k):
                far = int(d[np.arange(len(X)), new].argmax())
                C[k] = X[far]
                new[far] = k
                d = _sqdist(X, C)
        if np.array_equal(new, labels):
            break
        labels = new
        for k in range(K):
            C[k] = X[labels == k].mean(0)
    inertia = float(((X - C[labels]) ** 2).sum())
    return labels, C, inertia


def kmeans(features, K: int, seed: int = 0, max_iter: int = 300, n_init: int = 10):
    """Cluster rows of ``features`` into ``K`` groups.

    Returns ``(labels, centers)`` with 0-based labels. Each of the ``n_init``
    runs iterates until the assignment is stable or ``max_iter`` is reached;
    the run with the lowest within-cluster sum of squares is kept. A cluster
    that empties is re-seeded at the point farthest from its current centre.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("features must be a non-empty 2D array")
    if K < 1 or K > len(X):
        raise ValueError(f"cannot form K={K} clusters from {len(X)} samples")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        labels, C, inertia = _lloyd(X, K, rng, max_iter)
        if best is None or inertia < best[2]:
            best = (labels, C, inertia)
    return best[0], best[1]


def purity(labels, truth) -> float:
    """Fraction of samples whose cluster's majority truth label matches theirs."""
    labels = np.asarray(labels)
    truth = np.asarray(truth)
    hit = 0
    for k in np.unique(labels):
        _, counts = np.unique(truth[labels == k], return_counts=True)
        hit += counts.max()
    return hit / len(labels)
