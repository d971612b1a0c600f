"""k-means over reference embeddings, silhouette diagnostics, review sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embed import EmbeddingMatrix
from .errors import NotFoundError

DEFAULT_K = 12


@dataclass
class KMeansModel:
    centroids: np.ndarray  # (k, d)
    inertia: float
    seed: int

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def _pairwise_sq(X, C):
    # (N, k) squared Euclidean distances
    return (
        np.einsum("ij,ij->i", X, X)[:, None]
        - 2.0 * X @ C.T
        + np.einsum("ij,ij->i", C, C)[None, :]
    )


def _kmeanspp_init(X, k, rng):
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    d2 = np.sum((X - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[i] = X[rng.integers(n)]
            continue
        probs = d2 / total
        centroids[i] = X[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, np.sum((X - centroids[i]) ** 2, axis=1))
    return centroids


def _lloyd(X, centroids, max_iter, tol):
    inertia = np.inf
    for _ in range(max_iter):
        d2 = _pairwise_sq(X, centroids)
        labels = np.argmin(d2, axis=1)
        new_inertia = float(d2[np.arange(len(X)), labels].sum())
        assert new_inertia <= inertia + 1e-9 * max(1.0, inertia), "inertia increased"
        new_centroids = centroids.copy()
        for c in range(centroids.shape[0]):
            members = labels == c
            if members.any():
                new_centroids[c] = X[members].mean(axis=0)
            else:
                # reseed an empty cluster to the point farthest from its centroid
                far = np.argmax(d2[np.arange(len(X)), labels])
                new_centroids[c] = X[far]
        if inertia - new_inertia < tol * max(inertia, 1.0) and np.isfinite(inertia):
            return new_centroids, labels, new_inertia
        centroids, inertia = new_centroids, new_inertia
    d2 = _pairwise_sq(X, centroids)
    labels = np.argmin(d2, axis=1)
    return centroids, labels, float(d2[np.arange(len(X)), labels].sum())


def kmeans_fit(
    X: EmbeddingMatrix | np.ndarray,
    k: int = DEFAULT_K,
    seed: int = 0,
    n_init: int = 8,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> tuple[KMeansModel, np.ndarray]:
    """k-means++ with n_init restarts; returns the best model and its labels."""
    data = X.values if isinstance(X, EmbeddingMatrix) else np.asarray(X)
    data = data.astype(np.float64)
    if len(data) < k:
        raise ValueError(f"need at least k={k} points, got {len(data)}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        init = _kmeanspp_init(data, k, rng)
        centroids, labels, inertia = _lloyd(data, init, max_iter, tol)
        if best is None or inertia < best[2]:
            best = (centroids, labels, inertia)
    centroids, labels, inertia = best
    return KMeansModel(centroids=centroids, inertia=inertia, seed=seed), labels


def assign(model: KMeansModel, x: np.ndarray) -> int:
    """Nearest centroid by Euclidean distance; ties resolve to the lowest id."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.centroids.shape[1],):
        raise ValueError(
            f"dim mismatch: point has {x.shape}, centroids are {model.centroids.shape}"
        )
    d2 = np.sum((model.centroids - x) ** 2, axis=1)
    return int(np.argmin(d2))


def silhouette(
    X: np.ndarray, labels: np.ndarray, sample_cap: int = 2000, seed: int = 0
) -> float:
    """Mean silhouette coefficient s = (b - a) / max(a, b), Euclidean.

    Points in singleton clusters get s = 0. With more than sample_cap points
    the mean is taken over a seeded subsample (distances still against the
    full dataset's subsample).
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if len(uniq) < 2:
        raise ValueError("silhouette needs at least 2 clusters")
    if len(X) > sample_cap:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(len(X), size=sample_cap, replace=False))
        X, labels = X[idx], labels[idx]
        uniq = np.unique(labels)
        if len(uniq) < 2:
            raise ValueError("subsample collapsed to a single cluster")

    d = np.sqrt(np.maximum(_pairwise_sq(X, X), 0.0))
    sizes = {c: int((labels == c).sum()) for c in uniq}
    s = np.zeros(len(X))
    for i in range(len(X)):
        ci = labels[i]
        if sizes[ci] == 1:
            continue
        same = labels == ci
        a = d[i, same].sum() / (sizes[ci] - 1)
        b = min(d[i, labels == c].mean() for c in uniq if c != ci)
        s[i] = (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return float(s.mean())


def sample_for_review(
    assignment: dict[str, int], cluster_id: int, n: int = 9, seed: int = 0
) -> list[str]:
    """Uniform sample of window ids from one cluster, without replacement."""
    members = sorted(wid for wid, c in assignment.items() if c == cluster_id)
    if not members:
        raise NotFoundError(f"cluster {cluster_id} is empty or unknown")
    if len(members) <= n:
        return members
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(members), size=n, replace=False)
    return [members[i] for i in sorted(picked)]
