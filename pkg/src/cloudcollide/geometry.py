"""Scalar 3D primitives: points, spheres, boxes, rigid transforms.

All types are immutable values and every operation is a pure function, so
they are safe to share across threads.

Floating-point discipline: the point transform and the squared-distance
expression are written with a fixed evaluation order
(``(x*r00 + y*r01 + z*r02)*scale + t`` and ``dx*dx + dy*dy + dz*dz``).
The traversal kernels and the brute-force oracle reuse the same order, so
both sides of a borderline (tangent) overlap test see identical floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

ORTHONORMAL_TOL = 1e-9


def _as_vec3(value, what: str) -> np.ndarray:
    v = np.asarray(value, dtype=np.float64)
    if v.shape != (3,):
        raise ValueError(f"{what} must have shape (3,), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{what} must be finite, got {v}")
    v = v.copy()
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class Point3:
    """A finite point in model units."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        for c in (self.x, self.y, self.z):
            if not math.isfinite(c):
                raise ValueError(f"point coordinates must be finite, got {(self.x, self.y, self.z)}")

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    @classmethod
    def from_array(cls, a) -> "Point3":
        a = np.asarray(a, dtype=np.float64)
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True, eq=False)
class Sphere:
    """A center plus a non-negative radius, same units as the points."""

    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", _as_vec3(self.center, "sphere center"))
        r = float(self.radius)
        if not (math.isfinite(r) and r >= 0.0):
            raise ValueError(f"sphere radius must be finite and >= 0, got {self.radius}")
        object.__setattr__(self, "radius", r)


@dataclass(frozen=True, eq=False)
class Aabb:
    """Axis-aligned box given by min (lo) and max (hi) corners."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", _as_vec3(self.lo, "aabb lo"))
        object.__setattr__(self, "hi", _as_vec3(self.hi, "aabb hi"))
        if np.any(self.lo > self.hi):
            raise ValueError(f"aabb lo must be <= hi componentwise, got lo={self.lo} hi={self.hi}")

    @classmethod
    def from_points(cls, points) -> "Aabb":
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
            raise ValueError(f"expected a non-empty (n, 3) array, got shape {pts.shape}")
        return cls(pts.min(axis=0), pts.max(axis=0))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def extent(self) -> np.ndarray:
        return self.hi - self.lo

    def padded_to_cube(self) -> "Aabb":
        """Smallest cube with the same center containing this box."""
        half = 0.5 * float(self.extent.max())
        c = self.center
        return Aabb(c - half, c + half)

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=np.float64)
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotation + translation + optional uniform scale.

    Maps a point p to ``scale * (rotation @ p) + translation``. Only uniform
    scale is representable, which keeps spheres spheres: a transformed
    sphere is the sphere of the transformed center with radius * scale.
    """

    rotation: np.ndarray
    translation: np.ndarray
    scale: float = 1.0

    def __post_init__(self) -> None:
        r = np.asarray(self.rotation, dtype=np.float64)
        if r.shape != (3, 3) or not np.all(np.isfinite(r)):
            raise ValueError("rotation must be a finite 3x3 matrix")
        err = np.abs(r.T @ r - np.eye(3)).max()
        if err > ORTHONORMAL_TOL:
            raise ValueError(f"rotation is not orthonormal (max |R'R - I| = {err:.3e})")
        r = r.copy()
        r.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", _as_vec3(self.translation, "translation"))
        s = float(self.scale)
        if not (math.isfinite(s) and s > 0.0):
            raise ValueError(f"scale must be finite and > 0, got {self.scale}")
        object.__setattr__(self, "scale", s)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_translation(cls, t) -> "RigidTransform":
        return cls(np.eye(3), t)

    @classmethod
    def from_quaternion(cls, quat, translation=(0.0, 0.0, 0.0), scale: float = 1.0) -> "RigidTransform":
        return cls(rotation_from_quaternion(quat), translation, scale)

    def apply_points(self, points: np.ndarray) -> np.ndarray:
        """Transform an (n, 3) array of points. Fixed evaluation order."""
        pts = np.asarray(points, dtype=np.float64)
        r = self.rotation
        t = self.translation
        s = self.scale
        x = pts[..., 0]
        y = pts[..., 1]
        z = pts[..., 2]
        out = np.empty(pts.shape, dtype=np.float64)
        out[..., 0] = (x * r[0, 0] + y * r[0, 1] + z * r[0, 2]) * s + t[0]
        out[..., 1] = (x * r[1, 0] + y * r[1, 1] + z * r[1, 2]) * s + t[1]
        out[..., 2] = (x * r[2, 0] + y * r[2, 1] + z * r[2, 2]) * s + t[2]
        return out

    def apply_point(self, point) -> np.ndarray:
        return self.apply_points(np.asarray(point, dtype=np.float64).reshape(1, 3))[0]


def rotation_from_quaternion(quat) -> np.ndarray:
    """Rotation matrix from an (x, y, z, w) quaternion; normalizes first."""
    q = np.asarray(quat, dtype=np.float64)
    if q.shape != (4,):
        raise ValueError(f"quaternion must have shape (4,), got {q.shape}")
    n = float(np.sqrt(np.dot(q, q)))
    if not (math.isfinite(n) and n > 0.0):
        raise ValueError(f"quaternion must be non-zero and finite, got {q}")
    x, y, z, w = q / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def quaternion_from_rotation(r: np.ndarray) -> np.ndarray:
    """(x, y, z, w) unit quaternion for a rotation matrix (Shepperd's method)."""
    r = np.asarray(r, dtype=np.float64)
    t = float(np.trace(r))
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        w = 0.25 * s
        x = (r[2, 1] - r[1, 2]) / s
        y = (r[0, 2] - r[2, 0]) / s
        z = (r[1, 0] - r[0, 1]) / s
    elif r[0, 0] >= r[1, 1] and r[0, 0] >= r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        x = 0.25 * s
        w = (r[2, 1] - r[1, 2]) / s
        y = (r[0, 1] + r[1, 0]) / s
        z = (r[0, 2] + r[2, 0]) / s
    elif r[1, 1] >= r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        y = 0.25 * s
        w = (r[0, 2] - r[2, 0]) / s
        x = (r[0, 1] + r[1, 0]) / s
        z = (r[1, 2] + r[2, 1]) / s
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        z = 0.25 * s
        w = (r[1, 0] - r[0, 1]) / s
        x = (r[0, 2] + r[2, 0]) / s
        y = (r[1, 2] + r[2, 1]) / s
    q = np.array([x, y, z, w])
    return q / np.sqrt(np.dot(q, q))


def spheres_overlap(a: Sphere, b: Sphere) -> bool:
    """True iff the spheres intersect or touch (inclusive: tangency counts).

    Uses squared distances; no square root.
    """
    dx = a.center[0] - b.center[0]
    dy = a.center[1] - b.center[1]
    dz = a.center[2] - b.center[2]
    d2 = dx * dx + dy * dy + dz * dz
    rr = a.radius + b.radius
    return d2 <= rr * rr


def transform_sphere(m: RigidTransform, s: Sphere) -> Sphere:
    """Map the center through m and scale the radius by m.scale."""
    return Sphere(m.apply_point(s.center), s.radius * m.scale)


def invert(m: RigidTransform) -> RigidTransform:
    """Inverse transform: m composed with invert(m) is the identity."""
    rt = np.ascontiguousarray(m.rotation.T)
    inv_scale = 1.0 / m.scale
    t = -inv_scale * (rt @ m.translation)
    return RigidTransform(rt, t, inv_scale)


def compose(outer: RigidTransform, inner: RigidTransform) -> RigidTransform:
    """Transform equal to applying ``inner`` first, then ``outer``."""
    rotation = outer.rotation @ inner.rotation
    translation = outer.scale * (outer.rotation @ inner.translation) + outer.translation
    return RigidTransform(rotation, translation, outer.scale * inner.scale)


def merge_spheres(children: Sequence[Sphere]) -> Sphere:
    """Approximate enclosing sphere of a non-empty list of spheres.

    Ritter-style: start from the minimal sphere around the most distant
    pair of children, then grow over the children in order. O(k^2) in the
    child count; the result contains every child entirely (within
    1e-9 * radius), but is not guaranteed minimal.
    """
    if len(children) == 0:
        raise ValueError("empty node: merge_spheres requires at least one child sphere")
    centers = np.stack([c.center for c in children])[None, :, :]
    radii = np.array([c.radius for c in children])[None, :]
    c, r = merge_sphere_groups(centers, radii)
    return Sphere(c[0], float(r[0]))


def merge_sphere_groups(centers: np.ndarray, radii: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized sphere merge over G groups of k child spheres each.

    ``centers`` is (G, k, 3) and ``radii`` is (G, k). Ragged groups must be
    padded by repeating one of their own real children; the duplicates are
    no-ops for the result. Returns ((G, 3) centers, (G,) radii).
    """
    g, k, _ = centers.shape
    # seed with the pair maximizing center distance + both radii
    diff = centers[:, :, None, :] - centers[:, None, :, :]
    dx = diff[..., 0]
    dy = diff[..., 1]
    dz = diff[..., 2]
    dist = np.sqrt(dx * dx + dy * dy + dz * dz)
    span = dist + radii[:, :, None] + radii[:, None, :]
    pick = np.argmax(span.reshape(g, k * k), axis=1)
    i = pick // k
    j = pick % k
    rows = np.arange(g)
    ci = centers[rows, i]
    ri = radii[rows, i]
    cj = centers[rows, j]
    rj = radii[rows, j]
    d = dist[rows, i, j]
    r = np.maximum(0.5 * (d + ri + rj), np.maximum(ri, rj))
    safe = np.where(d > 0.0, d, 1.0)
    shift = np.clip(np.where(d > 0.0, (r - ri) / safe, 0.0), 0.0, 1.0)
    c = ci + (cj - ci) * shift[:, None]
    # grow over children in stored order; already-covered children are no-ops
    for t in range(k):
        ct = centers[:, t]
        rt = radii[:, t]
        dt = ct - c
        d = np.sqrt(dt[:, 0] * dt[:, 0] + dt[:, 1] * dt[:, 1] + dt[:, 2] * dt[:, 2])
        need = d + rt > r
        rn = 0.5 * (r + d + rt)
        safe = np.where(d > 0.0, d, 1.0)
        sh = np.where(need & (d > 0.0), (rn - r) / safe, 0.0)
        c = c + dt * sh[:, None]
        r = np.where(need, np.where(d > 0.0, rn, rt), r)
    return c, r


def sphere_contains_sphere(outer: Sphere, inner: Sphere, rel_tol: float = 1e-9) -> bool:
    """True if ``inner`` lies entirely within ``outer`` (within rel_tol * outer.radius)."""
    d = float(np.linalg.norm(outer.center - inner.center))
    return d + inner.radius <= outer.radius + rel_tol * outer.radius


def unit_directions(n: int) -> np.ndarray:
    """n deterministic, roughly uniform unit vectors (spherical Fibonacci)."""
    k = np.arange(n, dtype=np.float64)
    z = 1.0 - 2.0 * (k + 0.5) / n
    rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    golden = math.pi * (3.0 - math.sqrt(5.0))
    theta = golden * k
    return np.column_stack([rho * np.cos(theta), rho * np.sin(theta), z])


def iter_spheres(centers: np.ndarray, radii: np.ndarray) -> Iterator[Sphere]:
    for c, r in zip(centers, radii):
        yield Sphere(c, float(r))
