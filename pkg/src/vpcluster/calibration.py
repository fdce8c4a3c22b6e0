"""ROC calibration of the geodesic-distance threshold against viewport overlap."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from ._io import open_text
from .geometry import (
    GridTooCoarseError,
    SphereGrid,
    ViewportSpec,
    pairwise_geodesic,
    viewport_masks,
)
from .ingestion import TraceDataset

DEFAULT_O_TH = 0.8
DEFAULT_N_THRESHOLDS = 64
DEFAULT_FRAME_STRIDE = 5


class CalibrationError(ValueError):
    """The sample set cannot produce a ROC curve."""


@dataclass(frozen=True)
class PairSample:
    distance: float
    overlap: float
    positive: bool


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    tpr: float
    fpr: float


class Selection(NamedTuple):
    threshold: float
    fallback: bool


@dataclass(frozen=True)
class CalibrationResult:
    g_th: float
    o_th: float
    curve: list[RocPoint] = field(repr=False)
    fallback: bool = False
    n_pairs: int = 0

    def to_json(self, **extra) -> str:
        out = {
            "g_th_rad": self.g_th,
            "o_th": self.o_th,
            "fallback": self.fallback,
            "n_pairs": self.n_pairs,
        }
        out.update(extra)
        return json.dumps(out, indent=2, sort_keys=True) + "\n"


def default_thresholds(n: int = DEFAULT_N_THRESHOLDS) -> np.ndarray:
    """``n`` evenly spaced thresholds in (0, pi]."""
    if n < 1:
        raise ValueError("need at least one threshold")
    return np.linspace(math.pi / n, math.pi, n)


def collect_pairs(dataset: TraceDataset, spec: ViewportSpec, o_th: float,
                  frame_stride: int, grid: SphereGrid) -> list[PairSample]:
    """One sample per unordered user pair on every ``frame_stride``-th frame."""
    if not 0.0 < o_th < 1.0:
        raise ValueError(f"o_th must lie in (0, 1), got {o_th}")
    if frame_stride < 1:
        raise ValueError("frame_stride must be positive")
    n = dataset.n_users
    iu, ju = np.triu_indices(n, k=1)
    out: list[PairSample] = []
    for k in range(0, dataset.n_frames, frame_stride):
        dist = pairwise_geodesic(dataset.directions[:, k])
        masks = viewport_masks(dataset.frame_orientations(k), spec, grid)
        counts = masks.sum(axis=1)
        if np.any(counts == 0):
            raise GridTooCoarseError("a viewport contains no lattice points; increase the grid size")
        m = masks.astype(np.int32)
        inter = m @ m.T
        for i, j in zip(iu, ju):
            # same ratio as pairwise_overlap: intersection over mean single count
            ov = float(inter[i, j] / ((int(counts[i]) + int(counts[j])) / 2))
            out.append(PairSample(float(dist[i, j]), ov, ov >= o_th))
    return out


def roc_curve(samples: Sequence[PairSample], thresholds: Sequence[float]) -> list[RocPoint]:
    """Predicted positive iff distance <= threshold."""
    th = np.asarray(thresholds, dtype=float)
    if th.size == 0:
        raise ValueError("no thresholds given")
    if np.any(np.diff(th) < 0):
        raise ValueError("thresholds must be ascending")
    d = np.array([s.distance for s in samples], dtype=float)
    pos = np.array([s.positive for s in samples], dtype=bool)
    n_pos = int(pos.sum())
    n_neg = int(len(pos) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise CalibrationError(
            f"ROC undefined: {n_pos} positive and {n_neg} negative samples")
    # cumulative counts of samples with distance <= threshold
    d_pos = np.sort(d[pos])
    d_neg = np.sort(d[~pos])
    tp = np.searchsorted(d_pos, th, side="right")
    fp = np.searchsorted(d_neg, th, side="right")
    return [RocPoint(float(t), float(a / n_pos), float(b / n_neg))
            for t, a, b in zip(th, tp, fp)]


def select_threshold(curve: Sequence[RocPoint]) -> Selection:
    """Smallest threshold with TPR = 1, else the Youden-J maximizer (flagged)."""
    if not curve:
        raise ValueError("empty ROC curve")
    for p in curve:
        if p.tpr >= 1.0:
            return Selection(p.threshold, False)
    best = max(curve, key=lambda p: (p.tpr - p.fpr, -p.threshold))
    return Selection(best.threshold, True)


def calibrate(dataset: TraceDataset, spec: ViewportSpec, grid: SphereGrid,
              o_th: float = DEFAULT_O_TH, thresholds: Sequence[float] | None = None,
              frame_stride: int = DEFAULT_FRAME_STRIDE) -> CalibrationResult:
    if thresholds is None:
        thresholds = default_thresholds()
    samples = collect_pairs(dataset, spec, o_th, frame_stride, grid)
    curve = roc_curve(samples, thresholds)
    sel = select_threshold(curve)
    return CalibrationResult(sel.threshold, o_th, curve, sel.fallback, len(samples))


def write_roc_csv(curve: Sequence[RocPoint], path) -> None:
    with open_text(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("threshold_rad", "tpr", "fpr"))
        for p in curve:
            w.writerow((repr(p.threshold), repr(p.tpr), repr(p.fpr)))
