"""Per-frame neighbour graphs and windowed affinity matrices."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from ._io import open_text
from .geometry import Orientation, pairwise_geodesic, quaternions_to_directions

# distances computed for points placed exactly at the threshold can come out a
# few ulps above it; the threshold is closed, so allow that much
_THRESHOLD_EPS = 1e-12

DEFAULT_G_TH = math.pi / 10


def _check_binary_symmetric(adj: np.ndarray) -> np.ndarray:
    a = np.asarray(adj)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {a.shape}")
    a = a.astype(bool)
    if not np.array_equal(a, a.T):
        raise ValueError("adjacency matrix is not symmetric")
    if a.diagonal().any():
        raise ValueError("adjacency matrix has a non-zero diagonal")
    return a


@dataclass(frozen=True, eq=False)
class FrameGraph:
    adjacency: np.ndarray

    def __post_init__(self) -> None:
        a = _check_binary_symmetric(self.adjacency).copy()
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]


@dataclass(frozen=True, eq=False)
class AffinityMatrix:
    """Binary window affinity; ``start`` and ``length`` are frame indices/counts."""

    adjacency: np.ndarray
    start: int
    length: int
    tau: int

    def __post_init__(self) -> None:
        if not 1 <= self.tau <= self.length:
            raise ValueError(f"tau must lie in [1, {self.length}], got {self.tau}")
        a = _check_binary_symmetric(self.adjacency).copy()
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency, k=1))
        return list(zip(i.tolist(), j.tolist()))


def _as_directions(orientations) -> np.ndarray:
    if isinstance(orientations, np.ndarray):
        arr = np.asarray(orientations, dtype=float)
        if arr.ndim == 2 and arr.shape[1] == 3:
            return arr / np.linalg.norm(arr, axis=1, keepdims=True)
        if arr.ndim == 2 and arr.shape[1] == 4:
            return quaternions_to_directions(arr)
        raise ValueError(f"expected (n, 3) directions or (n, 4) quaternions, got {arr.shape}")
    q = np.array([o.as_array() for o in orientations], dtype=float).reshape(-1, 4)
    return quaternions_to_directions(q)


def build_frame_graph(orientations: Sequence[Orientation] | np.ndarray,
                      g_th: float) -> FrameGraph:
    """Edge between users whose view directions are within ``g_th`` radians.

    ``orientations`` may be a list of :class:`Orientation`, an (n, 4)
    quaternion array or an (n, 3) array of view directions.
    """
    if not 0.0 < g_th <= math.pi:
        raise ValueError(f"g_th must lie in (0, pi], got {g_th}")
    d = _as_directions(orientations)
    if d.shape[0] < 1:
        raise ValueError("at least one user is required")
    adj = pairwise_geodesic(d) <= g_th + _THRESHOLD_EPS
    np.fill_diagonal(adj, False)
    return FrameGraph(adj)


def build_affinity(graphs: Sequence[FrameGraph], tau: int, start: int = 0) -> AffinityMatrix:
    """a(i, j) = 1 iff the edge is present in at least ``tau`` of the graphs."""
    if not graphs:
        raise ValueError("a window needs at least one frame graph")
    n = graphs[0].n
    for g in graphs:
        if g.n != n:
            raise ValueError(f"frame graphs disagree on user count ({g.n} != {n})")
    counts = np.zeros((n, n), dtype=np.int64)
    for g in graphs:
        counts += g.adjacency
    return AffinityMatrix(counts >= tau, start=start, length=len(graphs), tau=tau)


def seconds_to_frames(seconds: float, frame_rate: float) -> int:
    """Round half up to a whole number of frames."""
    return int(math.floor(seconds * frame_rate + 0.5))


@dataclass(frozen=True)
class Window:
    start: int
    length: int
    tau: int

    @property
    def stop(self) -> int:
        return self.start + self.length


def iter_windows(n_frames: int, length: int, tau: int, stride: int | None = None) -> Iterator[Window]:
    """Consecutive windows over ``n_frames`` frames (stride defaults to ``length``).

    A shorter tail window keeps the same tau / length ratio, rounded half
    up and at least 1.
    """
    if length < 1 or not 1 <= tau <= length:
        raise ValueError(f"need 1 <= tau <= length, got tau={tau} length={length}")
    stride = length if stride is None else stride
    if stride < 1:
        raise ValueError("stride must be positive")
    start = 0
    while start < n_frames:
        size = min(length, n_frames - start)
        t = tau if size == length else max(1, min(size, math.floor(tau * size / length + 0.5)))
        yield Window(start, size, t)
        if start + size >= n_frames:
            break
        start += stride


def window_affinity(directions: np.ndarray, window: Window, g_th: float) -> AffinityMatrix:
    """Affinity for one window of a (n_users, n_frames, 3) direction table."""
    graphs = [build_frame_graph(directions[:, k], g_th)
              for k in range(window.start, window.stop)]
    return build_affinity(graphs, window.tau, start=window.start)


def write_edge_list(affinity: AffinityMatrix, path) -> None:
    with open_text(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("i", "j"))
        w.writerows(affinity.edges())
