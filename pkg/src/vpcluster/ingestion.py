"""Loading, synchronizing and synthesizing head-orientation traces.

Canonical trace CSV (UTF-8, header row), format detected from the header::

    user_id,timestamp_s,qw,qx,qy,qz
    user_id,timestamp_s,yaw_rad,pitch_rad,roll_rad

Corbillon-style logs (one file per user, ``timestamp, frame, qx, qy, qz, qw``
with +Z forward and +Y up) are read with ``format="corbillon"``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._io import open_text
from .geometry import (
    Orientation,
    euler_to_orientation,
    quaternions_to_directions,
    sphere_grid,
)

QUAT_HEADER = ("user_id", "timestamp_s", "qw", "qx", "qy", "qz")
EULER_HEADER = ("user_id", "timestamp_s", "yaw_rad", "pitch_rad", "roll_rad")
FORMATS = ("auto", "quaternion", "euler", "corbillon")


class TraceFormatError(ValueError):
    """A trace file could not be parsed."""


@dataclass(frozen=True)
class RawSample:
    user_id: str
    timestamp_s: float
    orientation: Orientation


@dataclass(frozen=True, eq=False)
class TraceDataset:
    """Dense, synchronized orientations.

    ``quaternions`` has shape (n_users, n_frames, 4), scalar first, canonical
    (qw >= 0); frame k is at time k / frame_rate.
    """

    user_ids: tuple[str, ...]
    frame_rate: float
    quaternions: np.ndarray
    duration_s: float

    def __post_init__(self) -> None:
        q = np.array(self.quaternions, dtype=float)
        if q.ndim != 3 or q.shape[2] != 4 or q.shape[0] != len(self.user_ids):
            raise ValueError(f"quaternion table has shape {q.shape}")
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be positive")
        if len(set(self.user_ids)) != len(self.user_ids):
            raise ValueError("user ids must be unique")
        expected = frame_count(self.duration_s, self.frame_rate)
        if q.shape[1] != expected:
            raise ValueError(f"{q.shape[1]} frames, expected {expected}")
        q.setflags(write=False)
        object.__setattr__(self, "user_ids", tuple(self.user_ids))
        object.__setattr__(self, "quaternions", q)
        d = quaternions_to_directions(q)
        d.setflags(write=False)
        object.__setattr__(self, "_directions", d)

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_frames(self) -> int:
        return self.quaternions.shape[1]

    @property
    def directions(self) -> np.ndarray:
        """View directions, shape (n_users, n_frames, 3)."""
        return self._directions

    def orientation(self, user: int, frame: int) -> Orientation:
        return Orientation.from_array(self.quaternions[user, frame])

    def frame_orientations(self, frame: int) -> list[Orientation]:
        return [Orientation.from_array(q) for q in self.quaternions[:, frame]]


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 59
    n_clusters: int = 3
    duration_s: float = 10.0
    frame_rate: float = 30.0
    attractor_speed: float = 0.2
    concentration: float = 2000.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_users < 1 or self.n_clusters < 1:
            raise ValueError("n_users and n_clusters must be positive")
        if self.n_clusters > self.n_users:
            raise ValueError("n_clusters cannot exceed n_users")
        if not (self.duration_s > 0 and self.frame_rate > 0):
            raise ValueError("duration_s and frame_rate must be positive")
        if not self.concentration > 0:
            raise ValueError("concentration must be positive")
        if not (self.attractor_speed >= 0 and math.isfinite(self.attractor_speed)):
            raise ValueError("attractor_speed must be finite and non-negative")


def frame_count(duration_s: float, frame_rate: float) -> int:
    return int(math.floor(duration_s * frame_rate + 0.5))


# ---------------------------------------------------------------------------
# loading


def _parse_float(text: str, line: int, column: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise TraceFormatError(f"line {line}: cannot parse {column}={text!r}") from None
    if not math.isfinite(value):
        raise TraceFormatError(f"line {line}: non-finite {column}={text!r}")
    return value


def _sample(user: str, t: float, q: Sequence[float] | None, e: Sequence[float] | None,
            line: int) -> RawSample:
    if t < 0:
        raise TraceFormatError(f"line {line}: negative timestamp {t}")
    try:
        if q is not None:
            if math.sqrt(sum(c * c for c in q)) < 1e-9:
                raise ValueError("zero-norm quaternion")
            o = Orientation.from_array(q)
        else:
            o = euler_to_orientation(*e)
    except ValueError as exc:
        raise TraceFormatError(f"line {line}: {exc}") from None
    return RawSample(user, t, o)


def _load_canonical(path: Path, fmt: str) -> list[RawSample]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        header = tuple(h.strip() for h in header)
        detected = {QUAT_HEADER: "quaternion", EULER_HEADER: "euler"}.get(header)
        if detected is None:
            raise TraceFormatError(f"line 1: unrecognized header {','.join(header)}")
        if fmt != "auto" and fmt != detected:
            raise TraceFormatError(f"line 1: header is {detected} but format {fmt} requested")
        samples = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise TraceFormatError(
                    f"line {line}: expected {len(header)} fields, got {len(row)}")
            user = row[0].strip()
            if not user:
                raise TraceFormatError(f"line {line}: empty user_id")
            vals = [_parse_float(v, line, c) for v, c in zip(row[1:], header[1:])]
            if detected == "quaternion":
                samples.append(_sample(user, vals[0], vals[1:], None, line))
            else:
                samples.append(_sample(user, vals[0], None, vals[1:], line))
    return samples


def _load_corbillon(path: Path) -> list[RawSample]:
    # columns: timestamp, frame index, qx, qy, qz, qw [, extra columns]
    # source frame is (x, y up, z forward); our frame is (x forward, y left,
    # z up), a cyclic axis permutation, so the vector part is permuted too.
    user = path.stem
    samples = []
    with open(path, newline="", encoding="utf-8") as fh:
        for line, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                float(row[0])
            except ValueError:
                if line == 1:
                    continue  # header
                raise TraceFormatError(f"line {line}: cannot parse timestamp {row[0]!r}") from None
            if len(row) < 6:
                raise TraceFormatError(f"line {line}: expected at least 6 fields")
            t = _parse_float(row[0], line, "timestamp")
            qx, qy, qz, qw = (_parse_float(v, line, c) for v, c in zip(row[2:6], "xyzw"))
            samples.append(_sample(user, t, (qw, qz, qx, qy), None, line))
    return samples


def load_traces(path, format: str = "auto") -> list[RawSample]:
    """Read raw samples from a trace file, in file order."""
    if format not in FORMATS:
        raise TraceFormatError(f"unknown trace format {format!r}; expected one of {FORMATS}")
    path = Path(path)
    if format == "corbillon":
        return _load_corbillon(path)
    return _load_canonical(path, format)


def write_traces(dataset: TraceDataset, path) -> None:
    """Write the dataset on its frame grid in the canonical quaternion format."""
    with open_text(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(QUAT_HEADER)
        for u, uid in enumerate(dataset.user_ids):
            for k in range(dataset.n_frames):
                q = dataset.quaternions[u, k]
                w.writerow([uid, repr(k / dataset.frame_rate)] + [repr(float(c)) for c in q])


def write_ground_truth(labels: dict[str, int], path) -> None:
    with open_text(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("user_id", "cluster_id"))
        for uid, c in labels.items():
            w.writerow((uid, c))


def read_ground_truth(path) -> dict[str, int]:
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["user_id"]: int(row["cluster_id"]) for row in csv.DictReader(fh)}


# ---------------------------------------------------------------------------
# synchronization


def slerp(q0: np.ndarray, q1: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Shortest-arc spherical interpolation, vectorized over ``t`` (and rows)."""
    q0 = np.asarray(q0, dtype=float)
    q1 = np.array(q1, dtype=float)
    t = np.asarray(t, dtype=float)[..., None]
    dot = np.sum(q0 * q1, axis=-1, keepdims=True)
    q1 = np.where(dot < 0, -q1, q1)
    dot = np.abs(dot)
    theta = np.arccos(np.clip(dot, -1.0, 1.0))
    sin_theta = np.sin(theta)
    small = sin_theta < 1e-9
    safe = np.where(small, 1.0, sin_theta)
    w0 = np.where(small, 1.0 - t, np.sin((1.0 - t) * theta) / safe)
    w1 = np.where(small, t, np.sin(t * theta) / safe)
    out = w0 * q0 + w1 * q1
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def _canonical(q: np.ndarray) -> np.ndarray:
    return np.where(q[..., :1] < 0, -q, q) + 0.0


def synchronize(samples: Sequence[RawSample], frame_rate: float, duration_s: float,
                user_ids: Sequence[str] | None = None) -> TraceDataset:
    """Resample every user onto the frame grid t_k = k / frame_rate.

    Orientations between samples are slerped; outside a user's recorded span
    the nearest sample is held.  Users appear in first-seen order unless
    ``user_ids`` is given.
    """
    if not frame_rate > 0:
        raise ValueError("frame_rate must be positive")
    if not duration_s > 0:
        raise ValueError("duration_s must be positive")
    by_user: dict[str, list[RawSample]] = {}
    for s in samples:
        by_user.setdefault(s.user_id, []).append(s)
    if user_ids is None:
        user_ids = list(by_user)
    if not user_ids:
        raise ValueError("no users to synchronize")
    for uid in user_ids:
        if not by_user.get(uid):
            raise ValueError(f"user {uid!r} has no samples")

    n_frames = frame_count(duration_s, frame_rate)
    times = np.arange(n_frames) / frame_rate
    table = np.empty((len(user_ids), n_frames, 4))
    for u, uid in enumerate(user_ids):
        rows = sorted(by_user[uid], key=lambda s: s.timestamp_s)
        ts = np.array([s.timestamp_s for s in rows])
        qs = np.array([s.orientation.as_array() for s in rows])
        # index of the last sample at or before each frame time
        hi = np.searchsorted(ts, times, side="right")
        lo = np.clip(hi - 1, 0, len(ts) - 1)
        hi = np.clip(hi, 0, len(ts) - 1)
        span = ts[hi] - ts[lo]
        frac = np.where(span > 0, (times - ts[lo]) / np.where(span > 0, span, 1.0), 0.0)
        frac = np.clip(frac, 0.0, 1.0)
        table[u] = _canonical(slerp(qs[lo], qs[hi], frac))
    return TraceDataset(tuple(user_ids), float(frame_rate), table, float(duration_s))


# ---------------------------------------------------------------------------
# synthetic traces


def sample_vmf(mu: np.ndarray, kappa: float, rng: np.random.Generator) -> np.ndarray:
    """Draw one von Mises-Fisher direction on S^2 around each row of ``mu``.

    Uses the closed-form inverse CDF of the cosine w = mu . x on the 2-sphere,
    written with log1p/expm1 so that very large kappa stays finite.
    """
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    n = mu.shape[0]
    u = rng.random(n)
    # w = 1 + log(u + (1 - u) exp(-2 kappa)) / kappa
    w = 1.0 + np.log1p(np.expm1(-2.0 * kappa) * (1.0 - u)) / kappa
    w = np.clip(w, -1.0, 1.0)
    phi = rng.random(n) * 2.0 * np.pi
    r = np.sqrt(np.clip(1.0 - w * w, 0.0, None))
    helper = np.where((np.abs(mu[:, 0]) < 0.9)[:, None], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    e1 = np.cross(mu, helper)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(mu, e1)
    x = (w[:, None] * mu
         + r[:, None] * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _random_rotation(rng: np.random.Generator) -> np.ndarray:
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def _axis_angle_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(angle) * k + (1 - math.cos(angle)) * (k @ k)


def attractor_seeds(n_clusters: int, rng: np.random.Generator) -> np.ndarray:
    """Well-separated start directions: farthest-point picks from a lattice."""
    pts = sphere_grid(2000).points @ _random_rotation(rng).T
    chosen = [int(rng.integers(len(pts)))]
    mind = np.full(len(pts), np.inf)
    for _ in range(n_clusters - 1):
        mind = np.minimum(mind, np.arccos(np.clip(pts @ pts[chosen[-1]], -1, 1)))
        chosen.append(int(np.argmax(mind)))
    return pts[chosen]


def _directions_to_quaternions(d: np.ndarray) -> np.ndarray:
    yaw = np.arctan2(d[..., 1], d[..., 0])
    pitch = np.arcsin(np.clip(d[..., 2], -1.0, 1.0))
    # q = qz(yaw) * qy(-pitch), roll = 0
    cy, sy = np.cos(yaw / 2), np.sin(yaw / 2)
    cp, sp = np.cos(-pitch / 2), np.sin(-pitch / 2)
    q = np.stack([cy * cp, -sy * sp, cy * sp, sy * cp], axis=-1)
    return _canonical(q)


def attractor_paths(config: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Attractor directions per frame, shape (n_clusters, n_frames, 3).

    All attractors ride one rigid rotation about a random axis at
    ``attractor_speed`` rad/s, which keeps their mutual separations fixed.
    """
    seeds = attractor_seeds(config.n_clusters, rng)
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    n_frames = frame_count(config.duration_s, config.frame_rate)
    out = np.empty((config.n_clusters, n_frames, 3))
    for k in range(n_frames):
        rot = _axis_angle_matrix(axis, config.attractor_speed * k / config.frame_rate)
        out[:, k] = seeds @ rot.T
    return out


def synth_traces(config: SynthConfig) -> tuple[TraceDataset, dict[str, int]]:
    """Planted-cluster traces: users jitter around moving attractors."""
    rng = np.random.default_rng(config.rng_seed)
    paths = attractor_paths(config, rng)
    labels = np.arange(config.n_users) % config.n_clusters
    rng.shuffle(labels)
    n_frames = paths.shape[1]
    width = len(str(config.n_users - 1))
    user_ids = tuple(f"u{i:0{width}d}" for i in range(config.n_users))
    dirs = np.empty((config.n_users, n_frames, 3))
    for k in range(n_frames):
        dirs[:, k] = sample_vmf(paths[labels, k], config.concentration, rng)
    ds = TraceDataset(user_ids, float(config.frame_rate), _directions_to_quaternions(dirs),
                      float(config.duration_s))
    return ds, {uid: int(c) for uid, c in zip(user_ids, labels)}
