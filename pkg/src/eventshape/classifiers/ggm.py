"""Generative Gaussian model over HOE quadrant histograms.

Each cluster keeps a mean histogram (per-quadrant blocks renormalised to sum
1) and the covariance of the 4-vector of per-quadrant squared Euclidean
distances between its members and that mean. A window is scored against a
cluster by ``exp(-d' inv(S) d)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

N_QUADRANTS = 4
# floor for the ridge when a cluster's distance vectors have no spread
MIN_RIDGE = 1e-12


def _blocks(f, V):
    return np.asarray(f, dtype=float).reshape(-1, N_QUADRANTS, V)


def renormalize_blocks(f, V: int) -> np.ndarray:
    b = _blocks(f, V).copy()
    s = b.sum(-1, keepdims=True)
    np.divide(b, s, out=b, where=s > 0)
    return b.reshape(np.shape(f))


def quadrant_distances(features, mean, V: int) -> np.ndarray:
    """(n, 4) squared Euclidean distances between feature and mean blocks."""
    F = _blocks(features, V)
    m = _blocks(mean, V)[0]
    return ((F - m[None]) ** 2).sum(-1)


@dataclass(eq=False)
class GgmModel:
    V: int
    means: np.ndarray  # (K, 4V)
    covariances: np.ndarray  # (K, 4, 4), regularised
    sizes: np.ndarray  # (K,)
    class_names: Optional[list] = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        self._inv = np.linalg.inv(self.covariances)

    @property
    def K(self) -> int:
        return len(self.means)

    def exponents(self, features) -> np.ndarray:
        """(n, K) quadratic forms d' inv(S_k) d."""
        F = np.atleast_2d(np.asarray(features, dtype=float))
        out = np.empty((len(F), self.K))
        for k in range(self.K):
            d = quadrant_distances(F, self.means[k], self.V)
            out[:, k] = np.einsum("ni,ij,nj->n", d, self._inv[k], d)
        return out

    def score(self, features) -> np.ndarray:
        """(n, K) similarity scores in (0, 1]; 1 at the cluster mean.

        Far-away windows can underflow to 0.
        """
        return np.exp(-self.exponents(features))

    def to_dict(self) -> dict:
        return {
            "type": "ggm",
            "format_version": 1,
            "V": self.V,
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
            "sizes": self.sizes.tolist(),
            "class_names": self.class_names,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GgmModel":
        if d.get("type") != "ggm" or d.get("format_version") != 1:
            raise ValueError("not a version-1 GGM model")
        return cls(d["V"], np.array(d["means"]), np.array(d["covariances"]),
                   np.array(d["sizes"]), d.get("class_names"), d.get("config", {}))


def ggm_fit(features, labels, K: int, V: int = 4) -> GgmModel:
    """Fit one (mean, covariance) pair per 0-based cluster label."""
    F = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    means, covs, sizes = [], [], []
    for k in range(K):
        members = F[labels == k]
        if len(members) < 2:
            raise ValueError(f"cluster {k} has {len(members)} member(s); covariance needs >= 2")
        m = renormalize_blocks(members.mean(0), V)
        d = quadrant_distances(members, m, V)
        cov = np.cov(d, rowvar=False)
        eps = max(1e-8 * np.trace(cov) / N_QUADRANTS, MIN_RIDGE)
        means.append(m)
        covs.append(cov + eps * np.eye(N_QUADRANTS))
        sizes.append(len(members))
    return GgmModel(V, np.array(means), np.array(covs), np.array(sizes))


def ggm_score(model: GgmModel, descriptor) -> np.ndarray:
    """Scores of a single descriptor against every cluster, shape (K,)."""
    return model.score(np.asarray(descriptor)[None, :])[0]


def name_clusters(labels, truth, K: int) -> list:
    """Name each cluster after its majority ground-truth label (None if empty)."""
    labels = np.asarray(labels)
    truth = np.asarray(truth, dtype=object)
    names = []
    for k in range(K):
        vals, counts = np.unique(truth[labels == k].astype(str), return_counts=True)
        names.append(str(vals[counts.argmax()]) if len(vals) else None)
    return names
