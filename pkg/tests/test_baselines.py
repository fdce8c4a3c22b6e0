import math

import networkx as nx
import numpy as np
import pytest

from oracles import random_graph
from vpcluster.baselines import (
    KMeansConfig,
    kmeans1,
    kmeans2,
    louvain,
    louvain_levels,
    modularity,
    spherical_kmeans,
    spherical_kmeans_fit,
    window_mean_directions,
)
from vpcluster.clustering import Clustering


def _two_triangles():
    a = np.zeros((6, 6), dtype=bool)
    for i, j in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]:
        a[i, j] = a[j, i] = True
    return a


# -- Louvain -----------------------------------------------------------------------

def test_louvain_examples():
    assert louvain(_two_triangles()).clusters == ((0, 1, 2), (3, 4, 5))
    assert louvain(~np.eye(6, dtype=bool)).clusters == ((0, 1, 2, 3, 4, 5),)
    assert louvain(np.zeros((4, 4), dtype=bool)).K == 4


def test_modularity_matches_networkx():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = random_graph(rng, 15, 0.3)
        parts = louvain_levels(a, rng_seed=1)[-1]
        g = nx.from_numpy_array(a.astype(int))
        if g.number_of_edges() == 0:
            continue
        assert math.isclose(modularity(a, parts), nx.community.modularity(g, parts), abs_tol=1e-12)


def test_louvain_modularity_non_decreasing():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = random_graph(rng, 30, 0.15)
        qs = [modularity(a, p) for p in louvain_levels(a, rng_seed=3)]
        assert all(q2 >= q1 - 1e-12 for q1, q2 in zip(qs, qs[1:]))
        singletons = modularity(a, [[i] for i in range(30)])
        assert qs[0] >= singletons - 1e-12


def test_louvain_deterministic_and_valid():
    a = random_graph(np.random.default_rng(2), 40, 0.2)
    c1, c2 = louvain(a, rng_seed=5), louvain(a, rng_seed=5)
    assert c1 == c2
    assert sorted(v for c in c1.clusters for v in c) == list(range(40))
    assert c1.algorithm == "louvain"


# -- spherical k-means ----------------------------------------------------------------

def _bunches(rng, centres, per, spread=0.002):
    pts = []
    for c in centres:
        pts.append(np.asarray(c, float) + spread * rng.standard_normal((per, 3)))
    x = np.vstack(pts)
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def test_kmeans_k_equals_n():
    x = np.random.default_rng(0).standard_normal((7, 3))
    res = spherical_kmeans_fit(x, KMeansConfig(7))
    assert len(set(res.labels.tolist())) == 7
    assert res.objective_trace[-1] == pytest.approx(0.0, abs=1e-12)


def test_kmeans_k_one():
    x = np.random.default_rng(1).standard_normal((9, 3))
    assert spherical_kmeans(x, KMeansConfig(1)).clusters == (tuple(range(9)),)


def test_kmeans_antipodal_bunches():
    rng = np.random.default_rng(2)
    x = _bunches(rng, [(0, 0, 1), (0, 0, -1)], 10)
    for seed in range(10):
        c = spherical_kmeans(x, KMeansConfig(2, rng_seed=seed))
        assert c.clusters == (tuple(range(10)), tuple(range(10, 20)))


def test_kmeans_objective_non_increasing():
    rng = np.random.default_rng(3)
    for seed in range(30):
        x = rng.standard_normal((40, 3))
        res = spherical_kmeans_fit(x, KMeansConfig(int(rng.integers(2, 8)), rng_seed=seed))
        for i, (a, b) in enumerate(zip(res.objective_trace, res.objective_trace[1:]), start=1):
            if i not in res.reseeds:
                assert b <= a + 1e-9


def test_kmeans_reseeds_degenerate_centroid():
    # two exactly antipodal points assigned to one centre have a zero mean
    x = np.array([[1.0, 0, 0], [-1.0, 0, 0], [0, 1.0, 0], [0, 0.999, 0.0447]])
    res = spherical_kmeans_fit(x, KMeansConfig(2, rng_seed=0))
    assert np.all(np.isfinite(res.centroids))
    assert np.allclose(np.linalg.norm(res.centroids, axis=1), 1.0)


def test_kmeans_deterministic_and_errors():
    x = np.random.default_rng(4).standard_normal((20, 3))
    a = spherical_kmeans_fit(x, KMeansConfig(3, rng_seed=7))
    b = spherical_kmeans_fit(x, KMeansConfig(3, rng_seed=7))
    assert np.array_equal(a.labels, b.labels)
    with pytest.raises(ValueError):
        spherical_kmeans_fit(x, KMeansConfig(21))
    with pytest.raises(ValueError):
        KMeansConfig(0)


def test_kmeans_variants_take_k_from_reference():
    rng = np.random.default_rng(5)
    x = _bunches(rng, [(1, 0, 0), (0, 1, 0), (0, 0, 1), (-1, 0, 0)], 5)
    ref2 = Clustering(((0, 1, 2, 3, 4, 5, 6, 7, 8, 9), tuple(range(10, 20))), 20, window=(3, 4, 2))
    ref4 = Clustering.from_labels(np.repeat(np.arange(4), 5).tolist(), window=(3, 4, 2))
    c1 = kmeans1(x, ref4)
    c2 = kmeans2(x, ref2)
    assert (c1.K, c1.algorithm, c1.window) == (4, "kmeans1", (3, 4, 2))
    assert (c2.K, c2.algorithm) == (2, "kmeans2")


def test_window_mean_directions():
    block = np.array([[[1.0, 0, 0], [0, 1.0, 0]], [[0, 0, 1.0], [0, 0, 1.0]],
                      [[1.0, 0, 0], [-1.0, 0, 0]]])
    m = window_mean_directions(block)
    assert np.allclose(m[0], [math.sqrt(0.5), math.sqrt(0.5), 0])
    assert np.allclose(m[1], [0, 0, 1])
    assert np.allclose(m[2], [1, 0, 0])
