"""Run the clustering algorithms over frames or consecutive windows."""

from __future__ import annotations

from typing import Iterable, Sequence

from .baselines import DEFAULT_SEED, kmeans1, kmeans2, louvain, window_mean_directions
from .clustering import Clustering, clique_clustering
from .graph import Window, iter_windows, seconds_to_frames, window_affinity
from .ingestion import TraceDataset

ALGORITHMS = ("clique", "louvain", "kmeans1", "kmeans2")


def check_algorithms(names: Iterable[str]) -> tuple[str, ...]:
    names = tuple(names)
    unknown = [a for a in names if a not in ALGORITHMS]
    if unknown:
        raise ValueError(f"unknown algorithm(s) {', '.join(unknown)}; choose from {', '.join(ALGORITHMS)}")
    if not names:
        raise ValueError("no algorithm selected")
    return names


def cluster_window(dataset: TraceDataset, window: Window, g_th: float,
                   algorithms: Sequence[str] = ALGORITHMS, seed: int = DEFAULT_SEED,
                   max_iters: int = 100) -> dict[str, Clustering]:
    """Cluster one window with each requested algorithm.

    Louvain and clique clustering share the window's affinity graph; the
    k-means variants cluster the per-user mean direction over the window with
    K taken from Louvain (kmeans1) or from clique clustering (kmeans2).
    """
    algorithms = check_algorithms(algorithms)
    affinity = window_affinity(dataset.directions, window, g_th)
    w = (window.start, window.length, window.tau)
    out: dict[str, Clustering] = {}
    need_louvain = "louvain" in algorithms or "kmeans1" in algorithms
    need_clique = "clique" in algorithms or "kmeans2" in algorithms
    res_louvain = louvain(affinity.adjacency, seed, window=w) if need_louvain else None
    res_clique = clique_clustering(affinity) if need_clique else None
    points = window_mean_directions(dataset.directions[:, window.start:window.stop])
    for name in algorithms:
        if name == "clique":
            out[name] = res_clique
        elif name == "louvain":
            out[name] = res_louvain
        elif name == "kmeans1":
            out[name] = kmeans1(points, res_louvain, max_iters, seed)
        else:
            out[name] = kmeans2(points, res_clique, max_iters, seed)
    return out


def frame_window(frame: int) -> Window:
    return Window(frame, 1, 1)


def windows_for(dataset: TraceDataset, T_s: float, tau_s: float,
                stride_s: float | None = None) -> list[Window]:
    """Consecutive windows of T_s seconds with threshold tau_s, in frames."""
    if not 0 < tau_s <= T_s:
        raise ValueError(f"need 0 < tau <= T, got tau={tau_s} T={T_s}")
    if T_s > dataset.duration_s + 1e-9:
        raise ValueError(f"window T={T_s}s exceeds the {dataset.duration_s}s dataset")
    length = max(1, seconds_to_frames(T_s, dataset.frame_rate))
    tau = min(length, max(1, seconds_to_frames(tau_s, dataset.frame_rate)))
    stride = None if stride_s is None else max(1, seconds_to_frames(stride_s, dataset.frame_rate))
    return list(iter_windows(dataset.n_frames, length, tau, stride))


class WindowClusterer:
    """Callable (dataset, window) -> Clustering for a single algorithm."""

    def __init__(self, algorithm: str, g_th: float, seed: int = DEFAULT_SEED,
                 max_iters: int = 100):
        check_algorithms([algorithm])
        self.algorithm = algorithm
        self.g_th = g_th
        self.seed = seed
        self.max_iters = max_iters

    def __call__(self, dataset: TraceDataset, window: Window) -> Clustering:
        return cluster_window(dataset, window, self.g_th, [self.algorithm],
                              self.seed, self.max_iters)[self.algorithm]

