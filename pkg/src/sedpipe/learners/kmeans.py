"""Lloyd's k-means with k-means++ seeding, used for codebooks and GMM init."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

SHIFT_TOL = 1e-6
MAX_ITERS = 100


@dataclass
class Codebook:
    centroids: np.ndarray  # (k, d)

    @property
    def size(self) -> int:
        return len(self.centroids)

    def assign(self, X: np.ndarray) -> np.ndarray:
        """Index of the Euclidean-nearest centroid per row."""
        return _nearest(np.asarray(X, dtype=np.float64), self.centroids)[0]


def _nearest(X: np.ndarray, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = (
        np.sum(X * X, axis=1)[:, None]
        + np.sum(C * C, axis=1)[None, :]
        - 2.0 * (X @ C.T)
    )
    d2 = np.maximum(d2, 0.0)
    idx = np.argmin(d2, axis=1)
    return idx, d2[np.arange(len(X)), idx]


def _plusplus_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = X[rng.integers(n)]  # all points coincide with a center
            continue
        probs = d2 / total
        centers[j] = X[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, np.sum((X - centers[j]) ** 2, axis=1))
    return centers


def kmeans_fit(X: np.ndarray, k: int, seed: int) -> Codebook:
    """k-means++ init, Lloyd iterations to centroid shift < 1e-6 (max 100).

    Empty clusters are reseeded to the point farthest from its centroid.
    Deterministic given (X, k, seed).
    """
    X = np.asarray(X, dtype=np.float64)
    if len(X) < k:
        raise ConfigError(f"need at least k={k} points, got {len(X)}")
    if k < 1:
        raise ConfigError("k must be >= 1")
    rng = np.random.default_rng(seed)
    centers = _plusplus_init(X, k, rng)
    for _ in range(MAX_ITERS):
        idx, d2 = _nearest(X, centers)
        new_centers = np.empty_like(centers)
        for j in range(k):
            members = idx == j
            if not members.any():
                new_centers[j] = X[np.argmax(d2)]  # farthest point revives the cluster
            else:
                new_centers[j] = X[members].mean(axis=0)
        shift = float(np.sqrt(np.max(np.sum((new_centers - centers) ** 2, axis=1))))
        centers = new_centers
        if shift < SHIFT_TOL:
            break
    return Codebook(centroids=centers)
