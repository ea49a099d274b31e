"""Broad-phase scene organization: uniform voxel grid and per-object octree.

The voxel grid cuts the scene into N x N x N cubic cells of equal volume
and records which objects' points land in each cell. Each object is then
segmented by a fixed-depth octree over its padded cubic bounds; the
non-empty cells at the bottom level are the partitions bridged by the
two sphere-hierarchy levels.

Binning is half-open on every axis ([min, max) per cell) with the top
boundary of the whole cube inclusive on the last cell, so every point has
exactly one home.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Aabb, RigidTransform
from .pointcloud import PointCloud

CUBIC_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Partition:
    """A non-empty octree leaf: cell bounds plus indices into the owner cloud."""

    cell_bounds: Aabb
    point_indices: np.ndarray

    def __post_init__(self) -> None:
        idx = np.ascontiguousarray(np.asarray(self.point_indices, dtype=np.int64))
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("partition must hold at least one point index")
        idx.setflags(write=False)
        object.__setattr__(self, "point_indices", idx)

    def __len__(self) -> int:
        return self.point_indices.size


@dataclass(frozen=True, eq=False)
class Octree:
    """Fixed-depth segmentation of a point subset into non-empty leaf cells."""

    bounds: Aabb
    max_depth: int
    leaves: tuple[Partition, ...]

    @property
    def partition_count(self) -> int:
        return len(self.leaves)


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """Sparse N x N x N grid: cell index -> [(object id, point indices)]."""

    bounds: Aabb
    n: int
    cells: dict[tuple[int, int, int], list[tuple[int, np.ndarray]]]

    @property
    def occupied_cell_count(self) -> int:
        return len(self.cells)

    def total_points(self) -> int:
        return sum(idx.size for entries in self.cells.values() for _, idx in entries)


def _bin_axis(coords: np.ndarray, lo: float, width: float, n: int) -> np.ndarray:
    """Half-open binning with the global top boundary folded into the last cell."""
    if width <= 0.0:
        return np.zeros(coords.shape[0], dtype=np.int64)
    idx = np.floor((coords - lo) / width).astype(np.int64)
    return np.clip(idx, 0, n - 1)


def build_voxel_grid(
    objects: Sequence[tuple[PointCloud, RigidTransform]],
    bounds: Aabb,
    n: int,
) -> VoxelGrid:
    """Bin every object's world-space points into the grid cells.

    ``bounds`` must be cubic (pad the tight scene box first); a point
    falling outside raises with the offending object and point index.
    """
    if n < 1:
        raise ValueError(f"grid resolution must be >= 1, got {n}")
    ext = bounds.extent
    if float(ext.max()) <= 0.0:
        raise ValueError("grid bounds are degenerate")
    if float(ext.max() - ext.min()) > CUBIC_TOL * float(ext.max()):
        raise ValueError(f"grid bounds must be cubic, extents are {ext}")

    width = float(ext[0]) / n
    cells: dict[tuple[int, int, int], list[tuple[int, np.ndarray]]] = {}
    for obj_id, (cloud, pose) in enumerate(objects):
        world = pose.apply_points(cloud.points)
        outside = (world < bounds.lo) | (world > bounds.hi)
        if outside.any():
            bad = int(np.flatnonzero(outside.any(axis=1))[0])
            raise ValueError(
                f"object {obj_id} ({cloud.name!r}) point {bad} at {world[bad]} "
                f"is outside the grid bounds"
            )
        ix = _bin_axis(world[:, 0], float(bounds.lo[0]), width, n)
        iy = _bin_axis(world[:, 1], float(bounds.lo[1]), width, n)
        iz = _bin_axis(world[:, 2], float(bounds.lo[2]), width, n)
        lin = (ix * n + iy) * n + iz
        order = np.argsort(lin, kind="stable")
        sorted_lin = lin[order]
        starts = np.flatnonzero(np.r_[True, sorted_lin[1:] != sorted_lin[:-1]])
        ends = np.r_[starts[1:], lin.size]
        for s, e in zip(starts, ends):
            members = order[s:e]
            first = members[0]
            key = (int(ix[first]), int(iy[first]), int(iz[first]))
            cells.setdefault(key, []).append((obj_id, np.sort(members)))
    return VoxelGrid(bounds=bounds, n=n, cells=cells)


def build_octree(
    cloud: PointCloud,
    subset: np.ndarray | None = None,
    max_depth: int = 4,
    max_leaf_points: int = 0,
) -> Octree:
    """Segment a point subset by even octant subdivision of its cubic bounds.

    Fixed mode (max_leaf_points == 0): subdivide to exactly ``max_depth``
    and keep the non-empty cells, so there are at most 8**max_depth
    partitions. Adaptive mode (> 0): split any cell holding more than
    ``max_leaf_points`` points, with ``max_depth`` as the depth cap.

    Partitions store point indices only; coordinates stay in the cloud.
    """
    if max_depth < 0:
        raise ValueError(f"max_depth must be >= 0, got {max_depth}")
    if subset is None:
        subset = np.arange(len(cloud), dtype=np.int64)
    else:
        subset = np.asarray(subset, dtype=np.int64)
        if subset.size == 0:
            raise ValueError("octree subset must be non-empty")
    pts = cloud.points[subset]
    bounds = Aabb.from_points(pts).padded_to_cube()
    edge = float(bounds.extent[0])

    if max_leaf_points > 0:
        leaves: list[Partition] = []
        _subdivide_adaptive(cloud.points, subset, bounds, 0, max_depth, max_leaf_points, leaves)
        return Octree(bounds=bounds, max_depth=max_depth, leaves=tuple(leaves))

    res = 1 << max_depth
    if edge <= 0.0 or res == 1:
        leaf = Partition(cell_bounds=bounds, point_indices=np.sort(subset))
        return Octree(bounds=bounds, max_depth=max_depth, leaves=(leaf,))

    width = edge / res
    ix = _bin_axis(pts[:, 0], float(bounds.lo[0]), width, res)
    iy = _bin_axis(pts[:, 1], float(bounds.lo[1]), width, res)
    iz = _bin_axis(pts[:, 2], float(bounds.lo[2]), width, res)
    lin = (ix * res + iy) * res + iz
    order = np.argsort(lin, kind="stable")
    sorted_lin = lin[order]
    starts = np.flatnonzero(np.r_[True, sorted_lin[1:] != sorted_lin[:-1]])
    ends = np.r_[starts[1:], lin.size]
    leaves = []
    for s, e in zip(starts, ends):
        members = order[s:e]
        first = members[0]
        cell = np.array([ix[first], iy[first], iz[first]], dtype=np.float64)
        cell_lo = bounds.lo + cell * width
        cell_hi = bounds.lo + (cell + 1.0) * width
        leaves.append(
            Partition(
                cell_bounds=Aabb(cell_lo, cell_hi),
                point_indices=np.sort(subset[members]),
            )
        )
    return Octree(bounds=bounds, max_depth=max_depth, leaves=tuple(leaves))


def _subdivide_adaptive(
    points: np.ndarray,
    subset: np.ndarray,
    bounds: Aabb,
    depth: int,
    max_depth: int,
    max_leaf_points: int,
    out: list[Partition],
) -> None:
    pts = points[subset]
    splittable = not np.all(pts == pts[0])  # identical points can never separate
    if subset.size <= max_leaf_points or depth >= max_depth or not splittable:
        out.append(Partition(cell_bounds=bounds, point_indices=np.sort(subset)))
        return
    mid = bounds.center
    octant = (
        (pts[:, 0] >= mid[0]).astype(np.int64) * 4
        + (pts[:, 1] >= mid[1]).astype(np.int64) * 2
        + (pts[:, 2] >= mid[2]).astype(np.int64)
    )
    for child in range(8):
        members = subset[octant == child]
        if members.size == 0:
            continue
        off = np.array([(child >> 2) & 1, (child >> 1) & 1, child & 1], dtype=np.float64)
        half = 0.5 * bounds.extent
        lo = bounds.lo + off * half
        _subdivide_adaptive(
            points, members, Aabb(lo, lo + half), depth + 1, max_depth, max_leaf_points, out
        )
