"""Comparison clusterings: Louvain modularity and spherical k-means."""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .clustering import Clustering
from .geometry import angle_between

DEFAULT_SEED = 0


def _to_graph(adjacency) -> nx.Graph:
    a = np.asarray(adjacency, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {a.shape}")
    if not np.allclose(a, a.T):
        raise ValueError("adjacency matrix is not symmetric")
    if np.any(a < 0):
        raise ValueError("adjacency weights must be non-negative")
    g = nx.Graph()
    g.add_nodes_from(range(a.shape[0]))
    i, j = np.nonzero(np.triu(a, k=1))
    g.add_weighted_edges_from((int(u), int(v), float(a[u, v])) for u, v in zip(i, j))
    return g


def modularity(adjacency, clusters) -> float:
    """Newman modularity of a partition of an undirected (weighted) graph."""
    a = np.asarray(adjacency, dtype=float)
    two_m = a.sum()
    if two_m == 0:
        return 0.0
    deg = a.sum(axis=1)
    q = 0.0
    for c in clusters:
        idx = list(c)
        q += a[np.ix_(idx, idx)].sum() / two_m - (deg[idx].sum() / two_m) ** 2
    return float(q)


def louvain_levels(adjacency, rng_seed: int = DEFAULT_SEED) -> list[list[list[int]]]:
    """Partition after each aggregation level, coarsest last."""
    g = _to_graph(adjacency)
    levels = nx.community.louvain_partitions(g, weight="weight", seed=rng_seed)
    return [sorted(sorted(c) for c in part) for part in levels]


def louvain(adjacency, rng_seed: int = DEFAULT_SEED, window=(0, 1, 1)) -> Clustering:
    """Two-phase Louvain on the thresholded graph (weights allowed)."""
    final = louvain_levels(adjacency, rng_seed)[-1]
    return Clustering(tuple(tuple(c) for c in final), n_users=len(adjacency),
                      algorithm="louvain", window=window)


@dataclass(frozen=True)
class KMeansConfig:
    k: int
    max_iters: int = 100
    rng_seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


@dataclass
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    objective_trace: list[float]
    reseeds: list[int]
    n_iter: int


def _geodesic_to(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """(n, k) geodesic distances between rows of x and rows of c."""
    return angle_between(x[:, None, :], c[None, :, :])


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d = angle_between(x, x[chosen[0]])
    for _ in range(1, k):
        w = d ** 2
        total = w.sum()
        if total <= 0:
            # every point coincides with a centre already; take the first unused index
            nxt = next(i for i in range(n) if i not in chosen)
        else:
            nxt = int(rng.choice(n, p=w / total))
        chosen.append(nxt)
        d = np.minimum(d, angle_between(x, x[nxt]))
    return x[chosen].copy()


def _objective(x, centroids, labels) -> float:
    return float(angle_between(x, centroids[labels]).sum())


def spherical_kmeans_fit(view_directions, config: KMeansConfig) -> KMeansResult:
    """Lloyd iterations on the sphere with geodesic assignment.

    The centroid update is the normalized mean of the members; an update that
    would raise the cluster's summed geodesic distance is rejected so the
    objective never increases between re-seed events.
    """
    x = np.asarray(view_directions, dtype=float)
    x = x / np.linalg.norm(x, axis=1, keepdims=True)
    n = x.shape[0]
    if config.k > n:
        raise ValueError(f"k={config.k} exceeds the number of users ({n})")
    rng = np.random.default_rng(config.rng_seed)
    centroids = _kmeanspp(x, config.k, rng)
    labels = np.argmin(_geodesic_to(x, centroids), axis=1)
    trace = [_objective(x, centroids, labels)]
    reseeds: list[int] = []
    it = 0
    for it in range(1, config.max_iters + 1):
        new_c = centroids.copy()
        reseeded = False
        for j in range(config.k):
            members = x[labels == j]
            mean = members.sum(axis=0) if len(members) else np.zeros(3)
            norm = np.linalg.norm(mean)
            if norm < 1e-9:
                # re-seed from the point farthest from its current centre
                far = angle_between(x, new_c[labels])
                far[labels == j] = -1.0
                new_c[j] = x[int(np.argmax(far))]
                reseeded = True
                continue
            cand = mean / norm
            if angle_between(members, cand).sum() <= angle_between(members, centroids[j]).sum():
                new_c[j] = cand
        new_labels = np.argmin(_geodesic_to(x, new_c), axis=1)
        converged = np.array_equal(new_labels, labels) and np.array_equal(new_c, centroids)
        centroids, labels = new_c, new_labels
        trace.append(_objective(x, centroids, labels))
        if reseeded:
            reseeds.append(it)
        if converged:
            break
    return KMeansResult(labels, centroids, trace, reseeds, it)


def spherical_kmeans(view_directions, config: KMeansConfig, algorithm: str = "kmeans",
                     window=(0, 1, 1)) -> Clustering:
    res = spherical_kmeans_fit(view_directions, config)
    # empty clusters (possible only with coincident points) are dropped
    return Clustering.from_labels(res.labels, algorithm=algorithm, window=window)


def window_mean_directions(directions: np.ndarray) -> np.ndarray:
    """Per-user normalized mean view direction of a (n_users, n_frames, 3) block."""
    m = np.asarray(directions, dtype=float).sum(axis=1)
    norm = np.linalg.norm(m, axis=1, keepdims=True)
    # a user whose directions cancel out keeps the window's first direction
    first = directions[:, 0, :]
    return np.where(norm > 1e-9, m / np.where(norm > 1e-9, norm, 1.0), first)


def kmeans1(view_directions, louvain_result: Clustering, max_iters: int = 100,
            rng_seed: int = DEFAULT_SEED) -> Clustering:
    """k-means with k taken from the Louvain result."""
    cfg = KMeansConfig(louvain_result.K, max_iters, rng_seed)
    return spherical_kmeans(view_directions, cfg, "kmeans1", louvain_result.window)


def kmeans2(view_directions, clique_result: Clustering, max_iters: int = 100,
            rng_seed: int = DEFAULT_SEED) -> Clustering:
    """k-means with k taken from the clique clustering result."""
    cfg = KMeansConfig(clique_result.K, max_iters, rng_seed)
    return spherical_kmeans(view_directions, cfg, "kmeans2", clique_result.window)
