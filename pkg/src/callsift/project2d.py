"""2-D projections of embedding matrices: exact PCA and a simplified UMAP.

Projections are views only; clustering and triage always operate in the
original high-dimensional space.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit


@dataclass(frozen=True)
class UmapConfig:
    n_neighbors: int = 15
    min_dist: float = 0.1
    epochs: int = 200
    negative_sample_rate: int = 5
    seed: int = 0
    learning_rate: float = 1.0

    def __post_init__(self):
        if self.n_neighbors < 2:
            raise ValueError("n_neighbors must be >= 2")
        if not (0 < self.min_dist < 1):
            raise ValueError("min_dist must be in (0, 1)")


def pca2(X: np.ndarray) -> np.ndarray:
    """Project onto the top-2 principal components.

    Uses the d x d covariance or the N x N Gram matrix, whichever is smaller.
    Sign convention: the largest-magnitude loading of each component is positive.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n < 2:
        raise ValueError("pca2 needs at least 2 points")
    Xc = X - X.mean(axis=0)
    if d <= n:
        cov = Xc.T @ Xc / (n - 1)
        vals, vecs = np.linalg.eigh(cov)
        comps = vecs[:, ::-1][:, :2]  # (d, 2), descending eigenvalue order
    else:
        gram = Xc @ Xc.T
        vals, vecs = np.linalg.eigh(gram)
        order = np.argsort(vals)[::-1][:2]
        comps = np.zeros((d, 2))
        for j, i in enumerate(order):
            if vals[i] > 1e-12:
                comps[:, j] = Xc.T @ vecs[:, i] / np.sqrt(vals[i])
    for j in range(2):
        peak = np.argmax(np.abs(comps[:, j]))
        if comps[peak, j] < 0:
            comps[:, j] = -comps[:, j]
    return Xc @ comps


def fit_output_curve(min_dist: float) -> tuple[float, float]:
    """Least-squares fit of 1 / (1 + a d^(2b)) to the piecewise target curve
    (1 for d <= min_dist, exp(-(d - min_dist)) beyond)."""
    xs = np.linspace(0.0, 3.0, 300)
    ys = np.where(xs <= min_dist, 1.0, np.exp(-(xs - min_dist)))

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2.0 * b))

    (a, b), _ = curve_fit(curve, xs, ys, p0=(1.0, 1.0), maxfev=10000)
    return float(a), float(b)


def _knn(X: np.ndarray, k: int):
    """Exact k nearest neighbors (excluding self) by Euclidean distance."""
    sq = np.einsum("ij,ij->i", X, X)
    d2 = sq[:, None] - 2.0 * X @ X.T + sq[None, :]
    np.fill_diagonal(d2, np.inf)
    idx = np.argsort(d2, axis=1)[:, :k]
    dist = np.sqrt(np.maximum(np.take_along_axis(d2, idx, axis=1), 0.0))
    return idx, dist


def _smooth_knn_weights(dist: np.ndarray, n_neighbors: int):
    """Per-point bandwidth by bisection so the effective neighbor count is
    log2(n_neighbors); returns membership weights per edge."""
    target = np.log2(n_neighbors)
    n = dist.shape[0]
    rho = dist[:, 0]
    weights = np.empty_like(dist)
    for i in range(n):
        shifted = np.maximum(0.0, dist[i] - rho[i])
        lo, hi = 1e-12, 1e12
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            val = np.exp(-shifted / mid).sum()
            if val > target:
                hi = mid
            else:
                lo = mid
        weights[i] = np.exp(-shifted / (0.5 * (lo + hi)))
    return weights


def umap2(X: np.ndarray, cfg: UmapConfig = UmapConfig()) -> np.ndarray:
    """Simplified UMAP layout: exact k-NN graph, fuzzy weights, PCA init,
    per-epoch vectorized attraction/repulsion with negative sampling.

    Deterministic for a fixed seed.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n <= cfg.n_neighbors:
        raise ValueError(f"need more than n_neighbors={cfg.n_neighbors} points, got {n}")

    idx, dist = _knn(X, cfg.n_neighbors)
    w = _smooth_knn_weights(dist, cfg.n_neighbors)

    # symmetrize: W = U + U^T - U * U^T on the union of directed edges
    u = {}
    for i in range(n):
        for jj in range(cfg.n_neighbors):
            u[(i, int(idx[i, jj]))] = w[i, jj]
    sym = {}
    for (i, j), wij in u.items():
        wji = u.get((j, i), 0.0)
        if (j, i) not in sym:
            sym[(i, j)] = wij + wji - wij * wji
    heads = np.array([e[0] for e in sym], dtype=np.intp)
    tails = np.array([e[1] for e in sym], dtype=np.intp)
    ws = np.array(list(sym.values()))

    a, b = fit_output_curve(cfg.min_dist)

    Y = pca2(X)
    spread = np.abs(Y).max()
    if spread > 0:
        Y = Y / spread * 10.0
    rng = np.random.default_rng(cfg.seed)

    for epoch in range(cfg.epochs):
        alpha = cfg.learning_rate * (1.0 - epoch / cfg.epochs)
        # attraction over edges drawn proportionally to membership weight
        active = rng.random(len(ws)) < ws
        h, t = heads[active], tails[active]
        diff = Y[h] - Y[t]
        d2 = np.maximum(np.einsum("ij,ij->i", diff, diff), 1e-12)
        grad_coef = (-2.0 * a * b * d2 ** (b - 1.0)) / (1.0 + a * d2**b)
        grad = np.clip(grad_coef[:, None] * diff, -4.0, 4.0)
        delta = np.zeros_like(Y)
        np.add.at(delta, h, alpha * grad)
        np.add.at(delta, t, -alpha * grad)
        # repulsion against sampled negatives
        for _ in range(cfg.negative_sample_rate):
            neg = rng.integers(0, n, size=len(h))
            diff = Y[h] - Y[neg]
            d2 = np.einsum("ij,ij->i", diff, diff)
            rep = (2.0 * b) / ((0.001 + d2) * (1.0 + a * d2**b))
            grad = np.clip(rep[:, None] * diff, -4.0, 4.0)
            np.add.at(delta, h, alpha * grad)
        Y = Y + delta
    return Y


def trustworthiness(X_high: np.ndarray, X_low: np.ndarray, k: int = 10) -> float:
    """Rank-penalty trustworthiness of a low-dimensional layout in [0, 1]."""
    X_high = np.asarray(X_high, dtype=np.float64)
    X_low = np.asarray(X_low, dtype=np.float64)
    n = len(X_high)
    if len(X_low) != n:
        raise ValueError("point counts differ")
    if not k < n / 2:
        raise ValueError(f"need k < N/2, got k={k}, N={n}")

    def ranks(Z):
        sq = np.einsum("ij,ij->i", Z, Z)
        d2 = sq[:, None] - 2.0 * Z @ Z.T + sq[None, :]
        np.fill_diagonal(d2, np.inf)
        return np.argsort(d2, axis=1)

    order_high = ranks(X_high)
    order_low = ranks(X_low)
    rank_high = np.empty((n, n), dtype=np.intp)
    rows = np.arange(n)[:, None]
    rank_high[rows, order_high] = np.arange(n)[None, :]

    penalty = 0.0
    for i in range(n):
        high_set = set(order_high[i, :k].tolist())
        for j in order_low[i, :k]:
            if int(j) not in high_set:
                penalty += rank_high[i, j] + 1 - k
    return float(1.0 - 2.0 * penalty / (n * k * (2 * n - 3 * k - 1)))
