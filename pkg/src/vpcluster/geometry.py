"""Sphere geometry for head orientations and viewports.

Axis convention (right-handed): +X is the forward reference direction, +Z is
up and +Y points to the viewer's left.  Yaw rotates about +Z (positive turns
left, towards +Y), pitch tilts the view direction up towards +Z, and roll spins
the viewport about the view axis.  The rotation of an orientation is therefore

    R = Rz(yaw) @ Ry(-pitch) @ Rx(roll)

and its view direction is the first column of R.

Viewport overlap is estimated by counting points of a deterministic Fibonacci
lattice that fall inside the viewports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

DEFAULT_H_FOV = math.radians(100.0)
DEFAULT_V_FOV = math.radians(100.0)
DEFAULT_GRID_SIZE = 10_000

# absolute slack on the closed viewport boundary so that points placed exactly
# at half the field of view are not lost to rounding
_BOUNDARY_EPS = 1e-12
_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


class GridTooCoarseError(ValueError):
    """No lattice point falls inside a viewport, so its area is unknown."""


@dataclass(frozen=True)
class UnitVector:
    """A point on the unit sphere. Components are normalized on construction."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        n = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        if not math.isfinite(n) or n == 0.0:
            raise ValueError(f"cannot normalize vector ({self.x}, {self.y}, {self.z})")
        object.__setattr__(self, "x", float(self.x / n))
        object.__setattr__(self, "y", float(self.y / n))
        object.__setattr__(self, "z", float(self.z / n))

    @classmethod
    def from_array(cls, a: Sequence[float]) -> "UnitVector":
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class Orientation:
    """Head pose as a unit quaternion (scalar first), canonicalized to qw >= 0."""

    qw: float
    qx: float
    qy: float
    qz: float

    def __post_init__(self) -> None:
        q = np.array([self.qw, self.qx, self.qy, self.qz], dtype=float)
        n = float(np.linalg.norm(q))
        if not math.isfinite(n) or n < 1e-12:
            raise ValueError(f"invalid quaternion {tuple(q)} (norm {n})")
        q /= n
        if q[0] < 0.0:
            q = -q
        for name, value in zip(("qw", "qx", "qy", "qz"), q):
            object.__setattr__(self, name, float(value) + 0.0)

    @classmethod
    def identity(cls) -> "Orientation":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, q: Sequence[float]) -> "Orientation":
        return cls(float(q[0]), float(q[1]), float(q[2]), float(q[3]))

    def as_array(self) -> np.ndarray:
        return np.array([self.qw, self.qx, self.qy, self.qz])

    def rotation_matrix(self) -> np.ndarray:
        return quaternion_to_matrix(self.as_array())


@dataclass(frozen=True)
class ViewportSpec:
    """Horizontal and vertical field of view, in radians."""

    h_fov: float = DEFAULT_H_FOV
    v_fov: float = DEFAULT_V_FOV

    def __post_init__(self) -> None:
        for name in ("h_fov", "v_fov"):
            value = getattr(self, name)
            if not (0.0 < value < math.pi):
                raise ValueError(f"{name} must lie in (0, pi), got {value}")

    @classmethod
    def from_degrees(cls, h_deg: float, v_deg: float) -> "ViewportSpec":
        return cls(math.radians(h_deg), math.radians(v_deg))


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Read-only lattice of unit vectors, stored as an (count, 3) array."""

    points: np.ndarray = field(repr=False)
    count: int

    def __iter__(self):
        return (UnitVector.from_array(p) for p in self.points)

    def __len__(self) -> int:
        return self.count


# ---------------------------------------------------------------------------
# quaternion helpers (arrays, scalar first)


def quaternion_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a * b (apply b first, then a)."""
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quaternion_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quaternions_to_directions(q: np.ndarray) -> np.ndarray:
    """View directions (first rotation column) for an (..., 4) quaternion array."""
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    d = np.stack([
        1 - 2 * (y * y + z * z),
        2 * (x * y + w * z),
        2 * (x * z - w * y),
    ], axis=-1)
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def _axis_quaternion(axis: int, angle: float) -> np.ndarray:
    q = np.zeros(4)
    q[0] = math.cos(angle / 2.0)
    q[1 + axis] = math.sin(angle / 2.0)
    return q


# ---------------------------------------------------------------------------
# public operations


def geodesic_distance(a: UnitVector, b: UnitVector) -> float:
    """Great-circle distance in [0, pi] between two unit vectors."""
    return float(angle_between(a.as_array(), b.as_array()))


def angle_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized great-circle distance along the last axis.

    Uses atan2(|a x b|, a . b), which stays accurate for nearly identical and
    nearly antipodal points where arccos of the dot product does not.
    """
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    dot = np.sum(a * b, axis=-1)
    return np.arctan2(cross, dot)


def pairwise_geodesic(directions: np.ndarray) -> np.ndarray:
    """(n, n) matrix of geodesic distances between rows of an (n, 3) array."""
    d = np.asarray(directions, dtype=float)
    return angle_between(d[:, None, :], d[None, :, :])


def euler_to_orientation(yaw: float, pitch: float, roll: float) -> Orientation:
    for v in (yaw, pitch, roll):
        if not math.isfinite(v):
            raise ValueError(f"non-finite Euler angle {v}")
    q = quaternion_multiply(
        _axis_quaternion(2, yaw),
        quaternion_multiply(_axis_quaternion(1, -pitch), _axis_quaternion(0, roll)),
    )
    return Orientation.from_array(q)


def orientation_to_euler(o: Orientation) -> tuple[float, float, float]:
    """Inverse of :func:`euler_to_orientation`, returns (yaw, pitch, roll)."""
    r = o.rotation_matrix()
    pitch = math.asin(max(-1.0, min(1.0, r[2, 0])))
    yaw = math.atan2(r[1, 0], r[0, 0])
    roll = math.atan2(r[2, 1], r[2, 2])
    return yaw, pitch, roll


def orientation_from_direction(d: Sequence[float], roll: float = 0.0) -> Orientation:
    """Orientation looking along ``d`` with the given roll."""
    u = UnitVector.from_array(d)
    yaw = math.atan2(u.y, u.x)
    pitch = math.asin(max(-1.0, min(1.0, u.z)))
    return euler_to_orientation(yaw, pitch, roll)


def compose(outer: Orientation, inner: Orientation) -> Orientation:
    """Rotation that applies ``inner`` first and then ``outer``."""
    return Orientation.from_array(quaternion_multiply(outer.as_array(), inner.as_array()))


def rotate_vector(o: Orientation, v: UnitVector) -> UnitVector:
    return UnitVector.from_array(o.rotation_matrix() @ v.as_array())


def view_direction(o: Orientation) -> UnitVector:
    return UnitVector.from_array(o.rotation_matrix()[:, 0])


def _masks(rots: np.ndarray, points: np.ndarray, spec: ViewportSpec) -> np.ndarray:
    # points into each viewport frame: local[n, g] = R_n^T p_g
    local = np.matmul(points[None, :, :], rots)
    fwd = local[..., 0]
    th = math.tan(spec.h_fov / 2.0)
    tv = math.tan(spec.v_fov / 2.0)
    return (
        (fwd > 0.0)
        & (np.abs(local[..., 1]) <= th * fwd + _BOUNDARY_EPS)
        & (np.abs(local[..., 2]) <= tv * fwd + _BOUNDARY_EPS)
    )


def viewport_mask(o: Orientation, spec: ViewportSpec, points: np.ndarray) -> np.ndarray:
    """Boolean mask of the rows of ``points`` (k, 3) inside the viewport of ``o``.

    Points are expressed in the viewport frame, dropped if they are not in
    front of the viewer, and gnomonically projected onto the tangent plane;
    the rectangle test |u| <= tan(h_fov/2), |v| <= tan(v_fov/2) is then done
    in multiplied-out form to avoid dividing by the forward component.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    return _masks(o.rotation_matrix()[None], pts, spec)[0]


def point_in_viewport(p: UnitVector, o: Orientation, spec: ViewportSpec) -> bool:
    return bool(viewport_mask(o, spec, p.as_array()[None, :])[0])


@lru_cache(maxsize=8)
def _fibonacci_points(n: int) -> np.ndarray:
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = i * _GOLDEN_ANGLE
    pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts.setflags(write=False)
    return pts


def sphere_grid(n: int = DEFAULT_GRID_SIZE) -> SphereGrid:
    """Fibonacci spiral lattice of ``n`` quasi-uniform points."""
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"grid size must be a positive integer, got {n!r}")
    n = int(n)
    return SphereGrid(points=_fibonacci_points(n), count=n)


def viewport_masks(orientations: Iterable[Orientation], spec: ViewportSpec,
                   grid: SphereGrid) -> np.ndarray:
    """Stack of viewport masks, shape (n_orientations, grid.count)."""
    rots = [o.rotation_matrix() for o in orientations]
    if not rots:
        return np.zeros((0, grid.count), dtype=bool)
    return _masks(np.stack(rots), grid.points, spec)


def quaternion_masks(quaternions: np.ndarray, spec: ViewportSpec, grid: SphereGrid) -> np.ndarray:
    """Batched :func:`viewport_mask` for an (n, 4) array of unit quaternions."""
    q = np.asarray(quaternions, dtype=float).reshape(-1, 4)
    rots = np.stack([quaternion_to_matrix(row) for row in q]) if len(q) else np.zeros((0, 3, 3))
    return _masks(rots, grid.points, spec)


def joint_overlap_from_masks(masks: np.ndarray) -> float:
    """Intersection count over the mean per-viewport count."""
    masks = np.asarray(masks, dtype=bool)
    if masks.shape[0] == 0:
        raise ValueError("at least one viewport is required")
    counts = masks.sum(axis=1)
    if np.any(counts == 0):
        raise GridTooCoarseError(
            "a viewport contains no lattice points; increase the grid size")
    inter = int(np.logical_and.reduce(masks, axis=0).sum())
    # sum of integers is exact, so the ratio is order-independent
    return float(inter / (int(counts.sum()) / masks.shape[0]))


def pairwise_overlap(o1: Orientation, o2: Orientation, spec: ViewportSpec,
                     grid: SphereGrid) -> float:
    """Fraction of a single viewport's area shared by the two viewports."""
    return joint_overlap_from_masks(viewport_masks([o1, o2], spec, grid))


def joint_overlap(orientations: Sequence[Orientation], spec: ViewportSpec,
                  grid: SphereGrid) -> float:
    """Fraction of a single viewport's area covered by all viewports at once."""
    if len(orientations) == 0:
        raise ValueError("joint_overlap needs at least one orientation")
    return joint_overlap_from_masks(viewport_masks(orientations, spec, grid))


def random_orientations(rng: np.random.Generator, n: int) -> list[Orientation]:
    """Uniformly distributed random orientations (normalized 4-D Gaussians)."""
    q = rng.standard_normal((n, 4))
    return [Orientation.from_array(row) for row in q]
