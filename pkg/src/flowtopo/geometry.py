"""Metric utilities: distance matrices, k-NN density cores, subsampling and
sequential maxmin landmarks.

Point clouds are plain ``(n, d)`` float arrays; distance matrices are dense
``(n, n)`` arrays.
"""

from __future__ import annotations

import csv
import math

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform


class DimensionMismatch(ValueError):
    pass


class KTooLarge(ValueError):
    pass


def as_cloud(points) -> np.ndarray:
    try:
        X = np.asarray(points, dtype=float)
    except ValueError as exc:  # ragged input
        raise DimensionMismatch("points do not share a dimension") from exc
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[1] < 1:
        raise DimensionMismatch(f"expected an (n, d) array, got shape {X.shape}")
    if len(X) == 0:
        raise ValueError("point cloud is empty")
    if not np.all(np.isfinite(X)):
        raise ValueError("point cloud has non-finite entries")
    return X


def distance_matrix(points) -> np.ndarray:
    """Pairwise Euclidean distances."""
    X = as_cloud(points)
    if len(X) == 1:
        return np.zeros((1, 1))
    return squareform(pdist(X))


def cross_distances(A, B) -> np.ndarray:
    A, B = as_cloud(A), as_cloud(B)
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch("clouds have different ambient dimensions")
    return cdist(A, B)


def knn_density(dm, k: int) -> np.ndarray:
    """Distance from each point to its k-th nearest other point.

    Small values mean high density.
    """
    dm = np.asarray(dm, dtype=float)
    n = len(dm)
    if not 1 <= k <= n - 1:
        raise KTooLarge(f"k={k} must lie in [1, {n - 1}]")
    others = dm.copy()
    np.fill_diagonal(others, np.inf)
    return np.partition(others, k - 1, axis=1)[:, k - 1]


def knn_density_points(points, k: int, chunk: int = 1024) -> np.ndarray:
    """Same as :func:`knn_density` but from coordinates, a block of rows at a
    time, so the full distance matrix is never held in memory."""
    X = as_cloud(points)
    n = len(X)
    if not 1 <= k <= n - 1:
        raise KTooLarge(f"k={k} must lie in [1, {n - 1}]")
    rho = np.empty(n)
    for s in range(0, n, chunk):
        block = cdist(X[s:s + chunk], X)
        block[np.arange(len(block)), np.arange(s, s + len(block))] = np.inf
        rho[s:s + chunk] = np.partition(block, k - 1, axis=1)[:, k - 1]
    return rho


def core_from_density(rho, p: float) -> np.ndarray:
    """Indices of the ``ceil(p/100 * n)`` smallest density values.

    Ties are broken by index; returned indices are sorted ascending so the
    core keeps the input order.
    """
    if not 0 < p <= 100:
        raise ValueError("p must lie in (0, 100]")
    rho = np.asarray(rho)
    keep = math.ceil(p / 100 * len(rho) - 1e-9)
    return np.sort(np.argsort(rho, kind="stable")[:keep])


def densest_core(dm, k: int, p: float) -> np.ndarray:
    """Indices of the ``ceil(p/100 * n)`` points with smallest k-NN distance."""
    return core_from_density(knn_density(dm, k), p)


def densest_core_points(points, k: int, p: float) -> np.ndarray:
    return core_from_density(knn_density_points(points, k), p)


def random_subsample(n_points: int, n: int, seed) -> np.ndarray:
    """Indices of a uniform subsample without replacement, in ascending order.

    Returns every index when ``n_points <= n``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if n_points <= n:
        return np.arange(n_points)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n_points, size=n, replace=False))


def maxmin_sample_points(points, m: int, start: int = 0) -> np.ndarray:
    """:func:`maxmin_sample` computing distances on the fly from coordinates."""
    X = as_cloud(points)
    n = len(X)
    if not 1 <= m <= n:
        raise ValueError(f"m={m} must lie in [1, {n}]")
    chosen = [int(start)]
    cover = cdist(X[start:start + 1], X)[0]
    for _ in range(m - 1):
        cover[chosen] = -np.inf
        nxt = int(np.argmax(cover))
        chosen.append(nxt)
        cover = np.minimum(cover, cdist(X[nxt:nxt + 1], X)[0])
    return np.array(chosen, dtype=np.int64)


def maxmin_sample(dm, m: int, start: int = 0) -> np.ndarray:
    """Greedy farthest-point landmarks, in selection order.

    Each new landmark maximizes the distance to those already chosen; ties go
    to the smallest index.
    """
    dm = np.asarray(dm, dtype=float)
    n = len(dm)
    if not 1 <= m <= n:
        raise ValueError(f"m={m} must lie in [1, {n}]")
    chosen = [int(start)]
    cover = dm[start].copy()
    for _ in range(m - 1):
        cover[chosen] = -np.inf
        nxt = int(np.argmax(cover))  # argmax returns the first maximum
        chosen.append(nxt)
        cover = np.minimum(cover, dm[nxt])
    return np.array(chosen, dtype=np.int64)


def cover_radius(dm, landmarks) -> float:
    """max over points of the distance to the nearest landmark."""
    dm = np.asarray(dm)
    return float(dm[:, landmarks].min(axis=1).max())


def save_distance_csv(path, dm):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(dm):
            w.writerow([repr(float(v)) for v in row])
