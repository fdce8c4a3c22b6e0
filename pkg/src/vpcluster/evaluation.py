"""Cluster quality metrics: joint viewport overlap per cluster, tables and series.

Table-style metrics count clusters with at least three users.  The per-frame
series averages over clusters with at least two users (singletons always
score 1), and its video-wide summary uses clusters with more than three.
"""

from __future__ import annotations

import csv
import json
import math
from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from ._io import open_text
from .clustering import Clustering
from .geometry import GridTooCoarseError, Orientation, SphereGrid, ViewportSpec, quaternion_masks
from .graph import Window
from .ingestion import TraceDataset
from .pipeline import windows_for

TABLE_MIN_SIZE = 3
SERIES_MIN_SIZE = 2
SUMMARY_MIN_SIZE = 4

REPORT_FIELDS = ("window_start", "T", "tau", "algorithm", "K", "mean_overlap_ge3",
                 "covered_ge3", "main_overlap", "main_population")


@dataclass(frozen=True)
class FrameMetrics:
    K: int
    mean_overlap_ge3: float | None
    covered_ge3: float
    main_overlap: float
    main_population: float


@dataclass(frozen=True)
class SeriesPoint:
    frame_index: int
    mean_overlap: float | None
    var_overlap: float | None


@dataclass
class SeriesResult:
    points: list[SeriesPoint]
    summary: float | None
    clusterings: list[Clustering]


class MaskCache:
    """Viewport masks per frame of one dataset, least recently used evicted first."""

    def __init__(self, dataset: TraceDataset, spec: ViewportSpec, grid: SphereGrid,
                 max_frames: int = 128):
        self.dataset = dataset
        self.spec = spec
        self.grid = grid
        self.max_frames = max_frames
        self._masks: OrderedDict[int, np.ndarray] = OrderedDict()

    def __call__(self, frame: int) -> np.ndarray:
        m = self._masks.get(frame)
        if m is None:
            m = quaternion_masks(self.dataset.quaternions[:, frame], self.spec, self.grid)
            self._masks[frame] = m
            if len(self._masks) > self.max_frames:
                self._masks.popitem(last=False)
        else:
            self._masks.move_to_end(frame)
        return m


def _cache_for(dataset, spec, grid, cache: MaskCache | None) -> MaskCache:
    if cache is None:
        return MaskCache(dataset, spec, grid)
    if cache.dataset is not dataset or cache.spec != spec or cache.grid.count != grid.count:
        raise ValueError("mask cache was built for a different dataset, spec or grid")
    return cache


def _mean(values: Sequence[float]) -> float:
    # fsum is correctly rounded, so the result does not depend on cluster order
    return math.fsum(values) / len(values)


def _var(values: Sequence[float]) -> float:
    m = _mean(values)
    return math.fsum((v - m) ** 2 for v in values) / len(values)


def _cluster_overlaps(clusters: Sequence[Sequence[int]], masks: np.ndarray) -> list[float]:
    counts = masks.sum(axis=1)
    if np.any(counts == 0):
        raise GridTooCoarseError("a viewport contains no lattice points; increase the grid size")
    out = []
    for c in clusters:
        idx = list(c)
        inter = int(np.logical_and.reduce(masks[idx], axis=0).sum())
        out.append(float(inter / (int(counts[idx].sum()) / len(idx))))
    return out


def main_cluster_index(clusters: Sequence[Sequence[int]]) -> int:
    """Most populated cluster; ties go to the lexicographically smallest member list."""
    return min(range(len(clusters)), key=lambda i: (-len(clusters[i]), sorted(clusters[i])))


def _metrics(clustering: Clustering, overlaps: Sequence[float]) -> FrameMetrics:
    n = clustering.n_users
    if clustering.K == 0:
        return FrameMetrics(0, None, 0.0, 0.0, 0.0)
    big = [i for i, c in enumerate(clustering.clusters) if len(c) >= TABLE_MIN_SIZE]
    mean = _mean([overlaps[i] for i in big]) if big else None
    covered = sum(len(clustering.clusters[i]) for i in big) / n
    m = main_cluster_index(clustering.clusters)
    return FrameMetrics(clustering.K, mean, covered, float(overlaps[m]),
                        len(clustering.clusters[m]) / n)


def frame_metrics(clustering: Clustering, orientations: Sequence[Orientation] | np.ndarray,
                  spec: ViewportSpec, grid: SphereGrid) -> FrameMetrics:
    """Metrics of a clustering against one frame of orientations."""
    if isinstance(orientations, np.ndarray):
        q = orientations
    else:
        q = np.array([o.as_array() for o in orientations], dtype=float).reshape(-1, 4)
    if q.shape[0] != clustering.n_users:
        raise ValueError(f"clustering covers {clustering.n_users} users, frame has {q.shape[0]}")
    masks = quaternion_masks(q, spec, grid)
    return _metrics(clustering, _cluster_overlaps(clustering.clusters, masks))


def window_metrics(clustering: Clustering, dataset: TraceDataset, spec: ViewportSpec,
                   grid: SphereGrid, cache: MaskCache | None = None) -> FrameMetrics:
    """Frame metrics with each cluster's overlap averaged over the clustering's window.

    For a single-frame window this is exactly :func:`frame_metrics`.
    """
    _check_users(clustering, dataset)
    start, length, _ = clustering.window
    if start < 0 or start + length > dataset.n_frames:
        raise ValueError(f"window {clustering.window} lies outside the dataset")
    masks = _cache_for(dataset, spec, grid, cache)
    per_frame = [_cluster_overlaps(clustering.clusters, masks(k))
                 for k in range(start, start + length)]
    return _metrics(clustering, [_mean(col) for col in zip(*per_frame)])


def _check_users(clustering: Clustering, dataset: TraceDataset) -> None:
    if clustering.n_users != dataset.n_users:
        raise ValueError(
            f"clustering covers {clustering.n_users} users, dataset has {dataset.n_users}")


def window_series(dataset: TraceDataset,
                  clusterer: Callable[[TraceDataset, Window], Clustering],
                  T_s: float, tau_s: float, spec: ViewportSpec, grid: SphereGrid,
                  stride_s: float | None = None,
                  cache: MaskCache | None = None) -> SeriesResult:
    """Cluster each consecutive window once, then score its clusters on every frame in it.

    Mean and (population) variance at a frame run over clusters with at
    least two users; they are None when no such cluster exists.  The summary
    is the mean joint overlap over all (frame, cluster) pairs with more than
    three users.
    """
    windows = windows_for(dataset, T_s, tau_s, stride_s)
    return series_over(dataset, clusterer, windows, spec, grid, cache)


def series_over(dataset: TraceDataset,
                clusterer: Callable[[TraceDataset, Window], Clustering],
                windows: Sequence[Window], spec: ViewportSpec, grid: SphereGrid,
                cache: MaskCache | None = None) -> SeriesResult:
    """:func:`window_series` over an explicit list of windows."""
    masks = _cache_for(dataset, spec, grid, cache)
    points: list[SeriesPoint] = []
    summary_vals: list[float] = []
    clusterings = []
    for w in windows:
        c = clusterer(dataset, w)
        _check_users(c, dataset)
        clusterings.append(c)
        for k in range(w.start, w.stop):
            ov = _cluster_overlaps(c.clusters, masks(k))
            vals = [o for o, cl in zip(ov, c.clusters) if len(cl) >= SERIES_MIN_SIZE]
            summary_vals += [o for o, cl in zip(ov, c.clusters) if len(cl) >= SUMMARY_MIN_SIZE]
            if vals:
                points.append(SeriesPoint(k, _mean(vals), _var(vals)))
            else:
                points.append(SeriesPoint(k, None, None))
    summary = _mean(summary_vals) if summary_vals else None
    return SeriesResult(points, summary, clusterings)


@dataclass
class Comparison:
    window: tuple[int, int, int]
    metrics: dict[str, FrameMetrics]

    def rows(self) -> list[dict]:
        start, length, tau = self.window
        return [dict(window_start=start, T=length, tau=tau, algorithm=name, **asdict(m))
                for name, m in self.metrics.items()]

    def to_json(self) -> str:
        return json.dumps(self.rows(), indent=2) + "\n"


def compare(clusterings: Mapping[str, Clustering], dataset: TraceDataset, spec: ViewportSpec,
            grid: SphereGrid, cache: MaskCache | None = None) -> Comparison:
    """Side-by-side metrics for clusterings of the same users and window."""
    if not clusterings:
        raise ValueError("nothing to compare")
    windows = {c.window for c in clusterings.values()}
    if len(windows) != 1:
        raise ValueError(f"clusterings cover different windows: {sorted(windows)}")
    for name, c in clusterings.items():
        if c.n_users != dataset.n_users:
            raise ValueError(f"{name}: clustering covers {c.n_users} users, dataset has {dataset.n_users}")
    cache = _cache_for(dataset, spec, grid, cache)
    metrics = {name: window_metrics(c, dataset, spec, grid, cache) for name, c in clusterings.items()}
    return Comparison(windows.pop(), metrics)


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_report_csv(comparisons: Sequence[Comparison], path) -> None:
    with open_text(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_FIELDS)
        for comp in comparisons:
            for row in comp.rows():
                w.writerow([_fmt(row[f]) for f in REPORT_FIELDS])


def write_series_csv(points: Sequence[SeriesPoint], path) -> None:
    with open_text(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("frame", "mean_overlap", "var_overlap"))
        for p in points:
            w.writerow((p.frame_index, _fmt(p.mean_overlap), _fmt(p.var_overlap)))
